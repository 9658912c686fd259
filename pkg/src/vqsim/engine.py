"""McLachlan time stepping for ``B(t) d|v>/dt = sum_j A_j(t) |v'_j(t)>``.

Each step projects the exact derivative onto the tangent space of the ansatz:

    M~_kj = Re <d_k v| B^dag B |d_j v>,    V~_k = sum_j Re <B d_k v| A_j |v'_j>

and solves ``M~ theta_dot = V~`` with regularization. Real time is the
special case ``B = I, A = -iH`` and imaginary time ``A = -(H - <H>)``, both
acting on the current state.
"""

from __future__ import annotations

import csv
from collections.abc import Callable
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .ansatz import Ansatz
from .overlap import Circuit, Rotation, exact_overlap, sampled_overlap, weighted_task
from .pauli import OperatorSum, expectation
from .states import DimensionError, StateVector

SELF = "self"
INITIAL = "initial"


class EvolutionError(RuntimeError):
    """Raised when a step produces non-finite parameter velocities."""

    def __init__(self, message: str, step: int | None = None):
        super().__init__(message if step is None else f"step {step}: {message}")
        self.step = step


@dataclass(frozen=True)
class Exact:
    """Every overlap evaluated exactly from statevectors."""


@dataclass(frozen=True)
class Shots:
    """Every overlap estimated from ``shots`` simulated Hadamard-test samples."""

    shots: int
    seed: int = 0

    def __post_init__(self):
        if self.shots < 1:
            raise ValueError("shots must be a positive integer")


def parse_estimator(text: str):
    """``"exact"`` or ``"shots:N"`` (optionally ``"shots:N:seed"``)."""
    parts = text.strip().lower().split(":")
    if parts == ["exact"]:
        return Exact()
    if parts[0] == "shots" and len(parts) in (2, 3):
        return Shots(int(float(parts[1])), int(parts[2]) if len(parts) == 3 else 0)
    raise ValueError(f"estimator must be 'exact' or 'shots:N', got {text!r}")


@dataclass(frozen=True)
class Tikhonov:
    """Solve ``(M + lam I) x = V``; ``lam=None`` means ``1e-6 * tr(M) / dim``."""

    lam: float | None = None
    relative: float = 1e-6


@dataclass(frozen=True)
class TruncatedSpectrum:
    """Pseudo-inverse keeping eigenvalues above ``cutoff * max eigenvalue``."""

    cutoff: float = 1e-8


@dataclass(frozen=True)
class Term:
    """One drive ``A_j(t) + shift(t, v) * I`` acting on a source state.

    ``operator`` is an OperatorSum or a callable ``t -> OperatorSum``.
    ``shift`` (optional) is a callable ``(t, v) -> complex`` receiving the
    current prepared vector, used for state-dependent identity corrections
    such as ``<H>`` in imaginary time. ``source`` is ``SELF``, ``INITIAL``
    (the state prepared at the start of the run) or a fixed StateVector.
    """

    operator: OperatorSum | Callable[[float], OperatorSum] | None
    source: str | StateVector = SELF
    shift: Callable[[float, np.ndarray], complex] | None = None

    def operator_at(self, t: float) -> OperatorSum | None:
        op = self.operator
        return op(t) if callable(op) else op

    def full_operator(self, t: float, v: np.ndarray, num_qubits: int) -> OperatorSum:
        op = self.operator_at(t)
        op = OperatorSum.zero(num_qubits) if op is None else op
        if self.shift is not None:
            op = op + OperatorSum.identity(num_qubits, self.shift(t, v))
        return op


@dataclass
class GeneralizedEvolutionProblem:
    num_qubits: int
    terms: list[Term]
    duration: float
    dt: float
    B: OperatorSum | Callable[[float], OperatorSum] | None = None
    name: str = ""

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"time step must be positive, got {self.dt}")
        if self.duration < self.dt:
            raise ValueError(f"duration {self.duration} shorter than one step {self.dt}")
        for term in self.terms:
            if isinstance(term.source, StateVector) and term.source.num_qubits != self.num_qubits:
                raise DimensionError("fixed source state on the wrong number of qubits")

    @property
    def num_steps(self) -> int:
        return max(1, int(round(self.duration / self.dt)))

    def B_at(self, t: float) -> OperatorSum | None:
        b = self.B
        return b(t) if callable(b) else b


@dataclass
class StepMatrices:
    M: np.ndarray
    V: np.ndarray
    M_stderr: np.ndarray | None = None
    V_stderr: np.ndarray | None = None


# assembly --------------------------------------------------------------------


def _source_vector(term: Term, v: np.ndarray, v_init: np.ndarray | None) -> np.ndarray:
    src = term.source
    if isinstance(src, StateVector):
        return src.amplitudes
    if src == SELF:
        return v
    if src == INITIAL:
        if v_init is None:
            raise ValueError("an INITIAL source needs the initial state")
        return v_init
    raise ValueError(f"unknown source selector {src!r}")


def assemble_from_tangent(
    problem: GeneralizedEvolutionProblem, v: np.ndarray, D: np.ndarray, t: float, v_init: np.ndarray | None = None
) -> StepMatrices:
    """Exact-mode M~ and V~ from a prepared vector and its tangent columns."""
    b = problem.B_at(t)
    BD = D if b is None else b.act(D)
    target = np.zeros(v.shape, dtype=complex)
    for term in problem.terms:
        src = _source_vector(term, v, v_init)
        op = term.operator_at(t)
        if op is not None:
            target += op.act(src)
        if term.shift is not None:
            target += term.shift(t, v) * src
    # Re(X^dag Y) = Re(X)^T Re(Y) + Im(X)^T Im(Y)
    stacked = np.concatenate((BD.real, BD.imag))
    M = stacked.T @ stacked
    return StepMatrices(M, stacked.T @ np.concatenate((target.real, target.imag)))


def _derivative_expansion(ansatz: Ansatz, theta: np.ndarray):
    """Per parameter, the list of ``(coefficient, Circuit)`` summing to ``d_p |v>``."""
    angles, alpha = ansatz._split(theta)
    ref = ansatz.reference.amplitudes
    rotations = [Rotation(g, float(angles[g.slot])) for g in ansatz.gates]
    base = Circuit(ref, tuple(rotations))
    cols: list[list[tuple[complex, Circuit]]] = [[] for _ in range(ansatz.num_parameters)]
    for k, g in enumerate(ansatz.gates):
        for coef, sigma in g.decomposition():
            circ = Circuit(ref, tuple(rotations[: k + 1]) + (sigma,) + tuple(rotations[k + 1 :]))
            cols[g.slot].append((alpha * coef, circ))
    if ansatz.scale:
        cols[-2].append((alpha / abs(alpha) if alpha != 0 else np.exp(1j * theta[-1]), base))
        cols[-1].append((1j * alpha, base))
    return base, alpha, cols


def _with_insertion(circ: Circuit, sigma, cache: dict) -> Circuit:
    if sigma.is_identity:
        return circ
    key = (id(circ), sigma.labels)
    if key not in cache:
        if circ.ops or circ._state is None:
            cache[key] = Circuit(circ.reference, circ.ops + (sigma.with_coefficient(1.0),))
        else:
            cache[key] = Circuit.from_state(OperatorSum([sigma.with_coefficient(1.0)]).act(circ.state()))
    return cache[key]


def enumerate_tasks(
    problem: GeneralizedEvolutionProblem,
    ansatz: Ansatz,
    theta,
    t: float,
    initial_theta=None,
):
    """Overlap tasks whose weighted sum gives M~ (upper triangle) and V~.

    Returns ``(m_tasks, v_tasks)``: ``m_tasks[(k, j)]`` and ``v_tasks[k]`` are
    lists of OverlapTasks; each entry's exact value sums to the matrix element.
    """
    theta = np.asarray(theta, dtype=float)
    n = ansatz.num_qubits
    base, alpha, cols = _derivative_expansion(ansatz, theta)
    b = problem.B_at(t)
    bb = OperatorSum.identity(n) if b is None else b.adjoint() * b
    ins_cache: dict = {}

    def template(left, right, sigma, drive=None):
        derivative = (left is not base, right is not base)
        if drive is not None:
            if left is base and right is base:
                return "expectation"
            return "S4" if drive == SELF else "S3"
        if not any(derivative):
            return "expectation"
        if not sigma.is_identity:
            return "S2"
        return "S1a" if all(derivative) else "S1b"

    m_tasks = {}
    P = ansatz.num_parameters
    for k in range(P):
        for j in range(k, P):
            tasks = []
            for ck, lk in cols[k]:
                for cj, rj in cols[j]:
                    for sigma in bb.terms:
                        coef = np.conj(ck) * cj * sigma.coefficient
                        tasks.append(weighted_task(lk, _with_insertion(rj, sigma, ins_cache), coef, template(lk, rj, sigma)))
            m_tasks[(k, j)] = tasks

    v_now = alpha * base.state()
    v_init = None
    if initial_theta is not None:
        _, alpha0, _ = _derivative_expansion(ansatz, np.asarray(initial_theta, dtype=float))
        init_circ = Circuit(ansatz.reference.amplitudes, tuple(Rotation(g, float(ansatz._split(initial_theta)[0][g.slot])) for g in ansatz.gates))
        v_init = (alpha0, init_circ)
    sources = []
    for term in problem.terms:
        op = term.full_operator(t, v_now, n)
        drive = op if b is None else b.adjoint() * op
        src = term.source
        if isinstance(src, StateVector):
            nrm = src.norm()
            sources.append((drive, nrm, Circuit.from_state(src.amplitudes / nrm), "fixed"))
        elif src == SELF:
            sources.append((drive, alpha, base, SELF))
        elif src == INITIAL:
            if v_init is None:
                raise ValueError("an INITIAL source needs the initial parameters")
            sources.append((drive, v_init[0], v_init[1], INITIAL))
    v_tasks = []
    for k in range(P):
        tasks = []
        for ck, lk in cols[k]:
            for drive, weight, circ, kind in sources:
                for sigma in drive.terms:
                    coef = np.conj(ck) * weight * sigma.coefficient
                    right = _with_insertion(circ, sigma, ins_cache)
                    tasks.append(weighted_task(lk, right, coef, template(lk, circ, sigma, kind)))
        v_tasks.append(tasks)
    return m_tasks, v_tasks


def assemble(problem, ansatz, theta, t, estimator=Exact(), *, initial_theta=None, step: int = 0) -> StepMatrices:
    """M~ and V~ at parameters ``theta`` and time ``t``.

    Exact mode contracts statevectors directly. Shots mode enumerates every
    overlap task, samples each with ``estimator.shots`` shots from the stream
    ``SeedSequence([seed, step])`` and sums the estimates; only ``k <= j`` of
    M~ is sampled and mirrored.
    """
    theta = np.asarray(theta, dtype=float)
    if isinstance(estimator, Exact):
        v, D = ansatz.tangent(theta)
        v_init = None
        if initial_theta is not None:
            v_init = ansatz.prepare(initial_theta).amplitudes
        return assemble_from_tangent(problem, v, D, t, v_init)
    if not isinstance(estimator, Shots):
        raise TypeError(f"unknown estimator {estimator!r}")
    m_tasks, v_tasks = enumerate_tasks(problem, ansatz, theta, t, initial_theta)
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([estimator.seed, step])))
    P = ansatz.num_parameters
    M = np.zeros((P, P))
    Mse = np.zeros((P, P))
    for (k, j), tasks in m_tasks.items():
        est = [sampled_overlap(task, estimator.shots, rng) for task in tasks]
        M[k, j] = M[j, k] = sum(e for e, _ in est)
        Mse[k, j] = Mse[j, k] = np.sqrt(sum(s * s for _, s in est))
    V = np.zeros(P)
    Vse = np.zeros(P)
    for k, tasks in enumerate(v_tasks):
        est = [sampled_overlap(task, estimator.shots, rng) for task in tasks]
        V[k] = sum(e for e, _ in est)
        Vse[k] = np.sqrt(sum(s * s for _, s in est))
    return StepMatrices(M, V, Mse, Vse)


def assemble_by_tasks(problem, ansatz, theta, t, *, initial_theta=None) -> StepMatrices:
    """Exact M~ and V~ summed task by task (slow; for cross-checking)."""
    m_tasks, v_tasks = enumerate_tasks(problem, ansatz, theta, t, initial_theta)
    P = ansatz.num_parameters
    M = np.zeros((P, P))
    for (k, j), tasks in m_tasks.items():
        M[k, j] = M[j, k] = sum(exact_overlap(task) for task in tasks)
    V = np.array([sum(exact_overlap(task) for task in tasks) for tasks in v_tasks])
    return StepMatrices(M, V)


# solving ---------------------------------------------------------------------


def solve_step(m: StepMatrices, regularization=Tikhonov()) -> np.ndarray:
    M = np.asarray(m.M, dtype=float)
    V = np.asarray(m.V, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1] or V.shape != (M.shape[0],):
        raise DimensionError(f"M~ {M.shape} and V~ {V.shape} are incompatible")
    if isinstance(regularization, Tikhonov):
        lam = regularization.lam
        if lam is None:
            tr = float(np.trace(M))
            if tr <= 0.0:
                return np.zeros_like(V)
            lam = regularization.relative * tr / M.shape[0]
        reg = M + lam * np.eye(M.shape[0])
        try:
            return cho_solve(cho_factor(reg, check_finite=False), V, check_finite=False)
        except LinAlgError:
            return np.linalg.solve(reg, V)
    if isinstance(regularization, TruncatedSpectrum):
        w, u = np.linalg.eigh(0.5 * (M + M.T))
        top = w.max(initial=0.0)
        if top <= 0.0:
            return np.zeros_like(V)
        keep = w > regularization.cutoff * top
        return u[:, keep] @ ((u[:, keep].T @ V) / w[keep])
    raise TypeError(f"unknown regularization {regularization!r}")


# integration -----------------------------------------------------------------


@dataclass
class EvolutionResult:
    times: np.ndarray
    thetas: np.ndarray
    observables: dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def final_theta(self) -> np.ndarray:
        return self.thetas[-1]

    def to_csv(self, path) -> None:
        write_timeseries_csv(path, self.times, self.thetas, self.observables)


def write_timeseries_csv(path, times, thetas=None, observables=None) -> None:
    observables = observables or {}
    header = ["t"]
    if thetas is not None:
        header += [f"theta_{i + 1}" for i in range(np.shape(thetas)[1])]
    header += list(observables)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for i, t in enumerate(times):
            row = [t]
            if thetas is not None:
                row += list(thetas[i])
            row += [observables[k][i] for k in observables]
            w.writerow([f"{float(x):.17g}" for x in row])


def _velocity(problem, ansatz, theta, t, estimator, regularization, initial_theta, v_init, step):
    if isinstance(estimator, Exact):
        v, D = ansatz.tangent(theta)
        m = assemble_from_tangent(problem, v, D, t, v_init)
    else:
        m = assemble(problem, ansatz, theta, t, estimator, initial_theta=initial_theta, step=step)
    return solve_step(m, regularization)


def evolve(
    problem: GeneralizedEvolutionProblem,
    ansatz: Ansatz,
    theta0,
    estimator=Exact(),
    observables: dict | None = None,
    regularization=Tikhonov(),
    integrator: str = "euler",
    record: bool = True,
) -> EvolutionResult:
    """Integrate the projected flow from ``t=0`` to ``problem.duration``.

    ``n = round(T / dt)`` steps of size ``T / n``. Observables are evaluated on
    the normalized prepared state at every grid point. With ``record=False``
    only the endpoints are kept.
    """
    if integrator not in ("euler", "rk4"):
        raise ValueError(f"integrator must be 'euler' or 'rk4', got {integrator!r}")
    if problem.num_qubits != ansatz.num_qubits:
        raise DimensionError("problem and ansatz act on different qubit counts")
    observables = observables or {}
    theta = np.array(theta0, dtype=float)
    theta_init = theta.copy()
    v_init = ansatz.prepare(theta_init).amplitudes
    n = problem.num_steps
    h = problem.duration / n
    times = np.linspace(0.0, problem.duration, n + 1)
    keep = range(n + 1) if record else (0, n)
    thetas = np.empty((len(keep), theta.size))
    obs = {k: np.empty(len(keep)) for k in observables}
    slot = 0

    def save(theta_now):
        nonlocal slot
        thetas[slot] = theta_now
        if obs:
            psi = ansatz.prepare(theta_now)
            for k, op in observables.items():
                obs[k][slot] = expectation(op, psi).real
        slot += 1

    save(theta)

    def f(th, t, step):
        return _velocity(problem, ansatz, th, t, estimator, regularization, theta_init, v_init, step)

    for step in range(n):
        t = times[step]
        if integrator == "euler":
            dtheta = h * f(theta, t, step)
        else:
            k1 = f(theta, t, step)
            k2 = f(theta + 0.5 * h * k1, t + 0.5 * h, step)
            k3 = f(theta + 0.5 * h * k2, t + 0.5 * h, step)
            k4 = f(theta + h * k3, t + h, step)
            dtheta = (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(dtheta)):
            raise EvolutionError(f"non-finite parameter velocity at t={t:.6g}", step)
        theta = theta + dtheta
        if record or step == n - 1:
            save(theta)
    return EvolutionResult(times if record else times[[0, -1]], thetas, obs)


# standard problems -----------------------------------------------------------


def _require_hermitian(H: OperatorSum) -> None:
    if not H.is_hermitian():
        raise ValueError("H must be Hermitian; use a GeneralizedEvolutionProblem for non-Hermitian drives")


def real_time_problem(H: OperatorSum, duration: float, dt: float) -> GeneralizedEvolutionProblem:
    _require_hermitian(H)
    return GeneralizedEvolutionProblem(H.num_qubits, [Term(-1j * H)], duration, dt, name="real-time")


def imag_time_problem(H: OperatorSum, duration: float, dt: float) -> GeneralizedEvolutionProblem:
    """Normalized Wick-rotated flow ``-(H - <H>)`` on the current state."""
    _require_hermitian(H)
    return GeneralizedEvolutionProblem(
        H.num_qubits,
        [Term(-1.0 * H, SELF, shift=lambda t, v: expectation(H, v).real)],
        duration,
        dt,
        name="imag-time",
    )


def real_time_coeffs(ansatz: Ansatz, theta, H: OperatorSum) -> StepMatrices:
    """``M = Re<d_k phi|d_j phi>`` and ``V_k = Im<d_k phi|H|phi>``."""
    _require_hermitian(H)
    return assemble(real_time_problem(H, 1.0, 1.0), ansatz, theta, 0.0)


def imag_time_coeffs(ansatz: Ansatz, theta, H: OperatorSum) -> StepMatrices:
    """``M`` as above and ``C_k = -Re<d_k phi|(H - <H>)|phi>``."""
    _require_hermitian(H)
    return assemble(imag_time_problem(H, 1.0, 1.0), ansatz, theta, 0.0)
