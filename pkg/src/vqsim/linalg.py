"""Variational matrix-vector products and linear solves.

Two routes are provided. The extrapolation path ``E(t) = I + (t/T)(M - I)``
turns ``M|v0>`` (or ``M^-1|v0>``) into the endpoint of a generalized
evolution. The SVD route writes a small ``M = U D V`` and realizes ``V`` and
``U`` with real-time evolution and ``D`` with normalized imaginary time.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import schur
from scipy.optimize import linear_sum_assignment

from .ansatz import Ansatz
from .engine import (
    INITIAL,
    SELF,
    EvolutionError,
    Exact,
    GeneralizedEvolutionProblem,
    Term,
    Tikhonov,
    evolve,
    imag_time_problem,
    real_time_problem,
)
from .pauli import OperatorSum, expectation, pauli_decompose
from .resources import alpha_for_accuracy

ZERO_FLOOR = 1e-12
COND_LIMIT = 1e12


class ZeroOutputError(ArithmeticError):
    """The target vector ``M|v>`` has (numerically) zero norm."""


@dataclass(frozen=True)
class EngineConfig:
    dt: float = 1e-3
    duration: float = 1.0
    estimator: object = Exact()
    regularization: object = Tikhonov()
    integrator: str = "euler"


def _dense(op: OperatorSum) -> np.ndarray:
    return op.act(np.eye(1 << op.num_qubits, dtype=complex))


@dataclass(frozen=True)
class ExtrapolationPath:
    M: OperatorSum
    T: float = 1.0
    variant: str = "unnormalized"  # or "normalized", "inverse"

    def __post_init__(self):
        if self.variant not in ("unnormalized", "normalized", "inverse"):
            raise ValueError(f"unknown path variant {self.variant!r}")
        if not self.T > 0:
            raise ValueError("path length must be positive")

    @property
    def G(self) -> OperatorSum:
        n = self.M.num_qubits
        return (self.M - OperatorSum.identity(n)) / self.T

    def E(self, t: float) -> OperatorSum:
        n = self.M.num_qubits
        return OperatorSum.identity(n) + (t / self.T) * (self.M - OperatorSum.identity(n))


def path_problem(M: OperatorSum, variant: str = "unnormalized", T: float = 1.0, dt: float = 1e-3, psi0=None) -> GeneralizedEvolutionProblem:
    """The generalized evolution whose endpoint is the target of ``variant``.

    * ``unnormalized``: ``d|v>/dt = G|v(0)>``, endpoint ``M|v0>``.
    * ``normalized``: ``d|psi>/dt = (N_dot/N)|psi> + N G|psi(0)>``, endpoint
      ``M|v0> / ||M|v0>||``; needs the normalized initial state ``psi0``.
    * ``inverse``: ``E(t) d|v>/dt = -G|v>``, endpoint ``M^-1|v0>``.
    """
    path = ExtrapolationPath(M, T, variant)
    n = M.num_qubits
    G = path.G
    if variant == "unnormalized":
        return GeneralizedEvolutionProblem(n, [Term(G, INITIAL)], T, dt, name="multiply")
    if variant == "normalized":
        if psi0 is None:
            raise ValueError("the normalized path needs the initial state")
        N, Ndot = normalization_profile(M, psi0, T)
        N(T)  # fail fast if the endpoint is annihilated
        terms = [
            Term(None, SELF, shift=lambda t, v: Ndot(t) / N(t)),
            Term(lambda t: N(t) * G, INITIAL),
        ]
        return GeneralizedEvolutionProblem(n, terms, T, dt, name="normalized-multiply")
    check_path_invertible(M, T)
    dense_steps = n <= 6

    def B(t):
        E = path.E(t)
        if dense_steps:
            cond = np.linalg.cond(_dense(E))
            if not cond < COND_LIMIT:
                raise EvolutionError(f"E(t) numerically singular at t={t:.6g} (condition {cond:.3g})")
        return E

    return GeneralizedEvolutionProblem(n, [Term(-1.0 * G, SELF)], T, dt, B=B, name="solve")


def multiply_via_path(M: OperatorSum, ansatz: Ansatz, theta0, config: EngineConfig = EngineConfig(), observables=None):
    """Endpoint ``M|v0>`` of the linear path; the ansatz needs ``scale=True`` to carry the norm."""
    problem = path_problem(M, "unnormalized", config.duration, config.dt)
    return evolve(problem, ansatz, theta0, config.estimator, observables, config.regularization, config.integrator)


def normalization_profile(M: OperatorSum, psi0, T: float = 1.0):
    """Return ``(N(t), N_dot(t))`` for the normalized path.

    ``q(s) = ||E(s) psi0||^2 = (1-s)^2 + s(1-s)<M + M^dag> + s^2 <M^dag M>``
    and ``N = q^(-1/2)``, both measured on the normalized initial state.
    """
    mm = expectation(M + M.adjoint(), psi0).real
    mdm = expectation(M.adjoint() * M, psi0).real

    def q(s):
        return (1 - s) ** 2 + s * (1 - s) * mm + s * s * mdm

    def dq(s):
        return -2 * (1 - s) + (1 - 2 * s) * mm + 2 * s * mdm

    def norm_factor(t):
        val = q(t / T)
        if val <= ZERO_FLOOR:
            raise ZeroOutputError(f"path norm vanishes at t={t:.6g}: the interpolant annihilates the input")
        return val**-0.5

    def norm_rate(t):
        s = t / T
        return -0.5 * norm_factor(t) ** 3 * dq(s) / T

    return norm_factor, norm_rate


def multiply_via_normalized_path(M: OperatorSum, ansatz: Ansatz, theta0, config: EngineConfig = EngineConfig(), observables=None):
    """Endpoint ``M|v0>/||M|v0>||`` of the normalized path."""
    psi0 = ansatz.prepare(theta0).normalized()
    problem = path_problem(M, "normalized", config.duration, config.dt, psi0)
    return evolve(problem, ansatz, theta0, config.estimator, observables, config.regularization, config.integrator)


def check_path_invertible(M: OperatorSum, T: float = 1.0, samples: int = 0) -> None:
    """Raise if ``E(t)`` becomes singular for some ``t`` in ``[0, T]``.

    ``E(s) = (1-s) I + s M`` is singular exactly when M has a real eigenvalue
    ``<= 0``; ``samples`` additional grid points are checked by condition number.
    """
    dense = _dense(M)
    for lam in np.linalg.eigvals(dense):
        if abs(lam.imag) <= 1e-12 * max(1.0, abs(lam)) and lam.real <= 0:
            raise EvolutionError(f"E(t) passes through a singular point (M has eigenvalue {lam.real:.6g})")
    path = ExtrapolationPath(M, T)
    for t in np.linspace(0, T, samples) if samples else ():
        cond = np.linalg.cond(_dense(path.E(t)))
        if not cond < COND_LIMIT:
            raise EvolutionError(f"E(t) numerically singular at t={t:.6g} (condition {cond:.3g})")


def solve_linear_system(M: OperatorSum, ansatz: Ansatz, theta0, config: EngineConfig = EngineConfig(), observables=None):
    """Endpoint ``M^-1|v0>`` of the inverse path (scale carries the norm)."""
    problem = path_problem(M, "inverse", config.duration, config.dt)
    return evolve(problem, ansatz, theta0, config.estimator, observables, config.regularization, config.integrator)


# SVD route -------------------------------------------------------------------


@dataclass(frozen=True)
class SvdRoute:
    """``M = U D V`` realized as ``exp(-i H_U T_U)``, ``exp(-H_D T_D)``, ``exp(-i H_V T_V)``.

    Hamiltonians are normalized to unit spectral norm so ``T`` is the
    evolution time; ``T = 0`` marks an identity factor. ``phases`` holds the
    global phases dropped from U and V. ``alpha`` is the suppression applied
    to zero singular values.
    """

    H_U: OperatorSum
    T_U: float
    H_D: OperatorSum
    T_D: float
    H_V: OperatorSum
    T_V: float
    alpha: float
    U: np.ndarray
    D: np.ndarray
    V: np.ndarray
    phases: tuple[float, float] = (0.0, 0.0)
    C: float | None = None

    @property
    def num_qubits(self) -> int:
        return self.H_D.num_qubits


def canonical_svd(M: np.ndarray):
    """``M = U @ diag(d) @ V`` with U as close to the identity as possible.

    Singular values are permuted to maximize ``|diag(U)|`` and column phases
    are chosen so ``diag(U)`` is real and nonnegative. Rows of V belonging to
    zero singular values carry a free phase; their largest entry is made real
    and positive.
    """
    u, s, vh = np.linalg.svd(M)
    rows, cols = linear_sum_assignment(-np.abs(u))
    perm = np.empty_like(cols)
    perm[rows] = cols
    u, s, vh = u[:, perm], s[perm], vh[perm, :]
    ph = np.exp(-1j * np.angle(np.where(np.abs(np.diag(u)) > 1e-14, np.diag(u), 1.0)))
    u = u * ph
    vh = ph.conj()[:, None] * vh
    for i in np.flatnonzero(s <= 1e-12 * max(s.max(), 1e-300)):
        lead = vh[i, np.argmax(np.abs(vh[i]))]
        vh[i] *= abs(lead) / lead
    return u, s, vh


def _unitary_generator(u: np.ndarray):
    """``(H, T, phase)`` with ``u = exp(i phase) exp(-i H T)``, ``||H|| = 1``, H traceless.

    Principal-branch logarithm: eigenphases are taken in ``(-pi, pi]``.
    """
    tri, z = schur(u, output="complex")
    ph = np.angle(np.diag(tri))
    ph[ph <= -np.pi + 1e-12] = np.pi
    gen = -(z * ph) @ z.conj().T  # u = exp(-i gen)
    gen = 0.5 * (gen + gen.conj().T)
    op = pauli_decompose(gen)
    phase = -op.identity_coefficient().real
    op = op.without_identity()
    norm = float(np.abs(np.linalg.eigvalsh(_dense(op))).max()) if len(op) else 0.0
    if norm < 1e-12:
        return OperatorSum.zero(op.num_qubits), 0.0, phase
    return op / norm, norm, phase


def build_svd_route(M, eps_D: float | None = None, C: float | None = None, alpha: float | None = None) -> SvdRoute:
    """SVD route for a 1- or 2-qubit matrix given densely or as an OperatorSum.

    ``alpha`` defaults to ``ln(2 / (C eps_D)) / 2``; C must exceed the
    ``1e-12`` floor, below which the output is the zero vector.
    """
    if isinstance(M, OperatorSum):
        M = _dense(M)
    M = np.asarray(M, dtype=complex)
    if M.shape not in ((2, 2), (4, 4)):
        raise ValueError(f"SVD route supports 1- and 2-qubit factors, got shape {M.shape}")
    if C is not None and C < ZERO_FLOOR:
        raise ZeroOutputError(f"C = {C:.3g} below floor; the output is the zero vector")
    if alpha is None:
        if eps_D is None or C is None:
            raise ValueError("give alpha, or both eps_D and C")
        alpha = alpha_for_accuracy(C, eps_D)
    u, s, vh = canonical_svd(M)
    smax = s.max()
    if smax < ZERO_FLOOR:
        raise ZeroOutputError("matrix is zero")
    zero = s <= 1e-12 * smax
    h = np.where(zero, alpha, -np.log(np.where(zero, 1.0, s)))
    h = h - h.min()
    t_d = float(h.max())
    if t_d <= 1e-12:  # all singular values equal: D is a multiple of I
        t_d = 0.0
    H_D = pauli_decompose(np.diag(h / t_d)) if t_d > 0 else OperatorSum.zero(int(np.log2(M.shape[0])))
    H_U, T_U, ph_u = _unitary_generator(u)
    H_V, T_V, ph_v = _unitary_generator(vh)
    return SvdRoute(H_U, T_U, H_D, t_d, H_V, T_V, float(alpha), u, np.diag(s), vh, (ph_u, ph_v), C)


def d_alpha(route: SvdRoute) -> np.ndarray:
    """The regularized diagonal factor actually realized by the route."""
    return np.diag(np.exp(-route.T_D * np.diag(_dense(route.H_D)).real)) if route.T_D > 0 else np.eye(route.D.shape[0])


@dataclass(frozen=True)
class RouteSteps:
    dt_V: float = 0.01
    dt_D: float = 0.1
    dt_U: float = 0.01


def apply_svd_route(
    route: SvdRoute,
    ansatz: Ansatz,
    theta,
    qubits=None,
    steps: RouteSteps = RouteSteps(),
    regularization=Tikhonov(),
    estimator=Exact(),
    check_norm: bool = True,
) -> np.ndarray:
    """Evolve ``theta`` so the prepared state approximates ``M|psi> / ||M|psi>||``.

    Real time under ``H_V`` for ``T_V``, normalized imaginary time under
    ``H_D`` for ``T_D``, then real time under ``H_U`` for ``T_U``. ``qubits``
    lists the register qubits the route acts on (default: the first ones).
    """
    n = ansatz.num_qubits
    k = route.num_qubits
    qubits = list(range(k)) if qubits is None else list(qubits)
    theta = np.array(theta, dtype=float)
    if check_norm:
        local = route.U @ route.D @ route.V
        big = pauli_decompose(local).embed(n, qubits)
        c = expectation(big.adjoint() * big, ansatz.prepare(theta)).real
        if c < ZERO_FLOOR:
            raise ZeroOutputError(f"<M^dag M> = {c:.3g} below floor: the jump annihilates the state")
    stages = (
        ("V", route.H_V, route.T_V, steps.dt_V, real_time_problem),
        ("D", route.H_D, route.T_D, steps.dt_D, imag_time_problem),
        ("U", route.H_U, route.T_U, steps.dt_U, real_time_problem),
    )
    for _, H, T, dt, make in stages:
        if T <= 0:
            continue
        n_sub = max(1, int(round(T / dt)))
        problem = make(H.embed(n, qubits), T, T / n_sub)
        theta = evolve(problem, ansatz, theta, estimator, None, regularization, record=False).final_theta
    return theta


def d_approximation_error(D: np.ndarray, D_alpha: np.ndarray, v) -> float:
    """Trace distance between the normalized ``D_alpha|v>`` and ``D|v>`` projectors."""
    v = np.asarray(v, dtype=complex)
    a = np.asarray(D) @ v
    b = np.asarray(D_alpha) @ v
    c = float(np.vdot(a, a).real)
    if c <= 0:
        raise ZeroOutputError("C = <v|D^2|v> is zero")
    fid = abs(np.vdot(a, b)) ** 2 / (c * float(np.vdot(b, b).real))
    return float(np.sqrt(max(0.0, 1.0 - fid)))
