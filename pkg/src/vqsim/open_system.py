"""Quantum-jump trajectories with a variational drift.

Each step either follows the normalized no-jump drift

    A = -i H - (L - <L>),    L = 1/2 sum_k L_k^dag L_k

projected onto the ansatz, or applies a jump ``L_k / ||L_k psi||`` through the
channel's SVD route. The jump decision accumulates ``Gamma += sum_k <L_k^dag
L_k> dt`` and jumps once ``exp(-Gamma) < q`` for a uniform ``q``; the channel is
then picked from the cumulative rate ratios with a second uniform ``q'``.
"""

from __future__ import annotations

import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .ansatz import Ansatz, build_hamiltonian_ansatz, ISING_BONDS
from .engine import (
    SELF,
    EvolutionError,
    Exact,
    GeneralizedEvolutionProblem,
    Shots,
    Term,
    Tikhonov,
    assemble,
    assemble_from_tangent,
    solve_step,
)
from .linalg import RouteSteps, SvdRoute, apply_svd_route, build_svd_route
from .pauli import OperatorSum, PauliString, expectation, parse_operator

RATE_WARNING = 0.1
JUMP_FLOOR = 1e-12


class JumpAnnihilationError(RuntimeError):
    """The selected jump operator maps the state to (numerically) zero."""


@dataclass
class LindbladModel:
    H: OperatorSum
    lindblad_ops: list[OperatorSum]

    def __post_init__(self):
        if not self.H.is_hermitian():
            raise ValueError("H must be Hermitian")
        n = self.H.num_qubits
        for k, op in enumerate(self.lindblad_ops):
            if op.num_qubits != n:
                raise ValueError(f"Lindblad operator {k + 1} acts on {op.num_qubits} qubits, H on {n}")
        self.ldl = [op.adjoint() * op for op in self.lindblad_ops]
        self.L = 0.5 * sum(self.ldl, OperatorSum.zero(n))

    @property
    def num_qubits(self) -> int:
        return self.H.num_qubits

    @property
    def num_channels(self) -> int:
        return len(self.lindblad_ops)

    def rates(self, state) -> np.ndarray:
        """``<L_k^dag L_k>`` on the normalized state, one entry per channel."""
        return np.array([expectation(a, state).real for a in self.ldl])

    def channel_norms(self) -> list[float]:
        """``||L_k^dag L_k||_inf`` (largest eigenvalue) per channel."""
        out = []
        for a in self.ldl:
            local, _ = _localize(a)
            dense = local.act(np.eye(1 << local.num_qubits, dtype=complex))
            out.append(float(np.linalg.eigvalsh(0.5 * (dense + dense.conj().T)).max()))
        return out


def drift_operator(model: LindbladModel, state) -> OperatorSum:
    """``-i H - (L - <L>)`` with ``<L>`` measured on ``state``."""
    n = model.num_qubits
    shift = expectation(model.L, state).real
    return -1j * model.H - model.L + OperatorSum.identity(n, shift)


def drift_problem(model: LindbladModel, T: float, dt: float) -> GeneralizedEvolutionProblem:
    L = model.L
    return GeneralizedEvolutionProblem(
        model.num_qubits,
        [Term(-1j * model.H - L, SELF, shift=lambda t, v: expectation(L, v).real)],
        T,
        dt,
        name="jump-drift",
    )


def _localize(op: OperatorSum) -> tuple[OperatorSum, tuple[int, ...]]:
    """Restrict an operator to its support; returns ``(local op, qubits)``."""
    qubits = op.support or (0,)
    terms = [PauliString("".join(t.labels[q] for q in qubits), t.coefficient) for t in op.terms]
    return OperatorSum(terms, len(qubits)), qubits


def default_jump_routes(model: LindbladModel, alpha: float = 6.0) -> list[tuple[SvdRoute, tuple[int, ...]]]:
    """One SVD route per channel built on the channel's support qubits."""
    routes = []
    for op in model.lindblad_ops:
        local, qubits = _localize(op)
        if local.num_qubits > 2:
            raise ValueError("SVD jump routes need Lindblad operators on at most two qubits")
        routes.append((build_svd_route(local, alpha=alpha), qubits))
    return routes


@dataclass
class TrajectoryRecord:
    seed: tuple
    times: np.ndarray
    jump_events: list[tuple[float, int]]  # (time, 1-based channel)
    observables: dict[str, np.ndarray]
    final_theta: np.ndarray
    thetas: np.ndarray | None = None
    warnings: list[str] = field(default_factory=list)

    @property
    def num_jumps(self) -> int:
        return len(self.jump_events)


def trajectory_rng(seed) -> np.random.Generator:
    """Counter-based stream for one trajectory; ``seed`` is an int or a tuple."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))


def select_channel(rates: np.ndarray, q_prime: float) -> int:
    """0-based channel ``k`` with ``q'`` in ``[gt_{k-1}, gt_k)`` of the cumulative ratios."""
    cum = cumulative_ratios(rates)[1:]
    return int(np.searchsorted(cum, q_prime, side="right"))


def cumulative_ratios(rates) -> np.ndarray:
    """``[0, gt_1, ..., gt_NL]`` with ``gt_NL = 1`` exactly."""
    rates = np.asarray(rates, dtype=float)
    total = rates.sum()
    if total <= 0:
        raise ValueError("cumulative ratios need a positive total rate")
    out = np.concatenate(([0.0], np.cumsum(rates) / total))
    out[-1] = 1.0
    return out


def run_trajectory(
    model: LindbladModel,
    ansatz: Ansatz,
    theta0,
    T: float,
    dt: float,
    seed,
    jump_routes=None,
    estimator=Exact(),
    regularization=Tikhonov(),
    observables: dict | None = None,
    route_steps: RouteSteps = RouteSteps(),
    record_parameters: bool = False,
) -> TrajectoryRecord:
    """One stochastic trajectory on the grid ``t_n = n T / round(T/dt)``.

    All randomness comes from :func:`trajectory_rng` of ``seed``: one draw of
    ``q`` at the start, then ``q'`` and a fresh ``q`` at every jump. A jump
    decided at step ``n`` (rates measured at ``t_n``) replaces that step's
    drift and its result is recorded at ``t_{n+1}``.
    """
    if model.num_qubits != ansatz.num_qubits:
        raise ValueError("model and ansatz act on different qubit counts")
    observables = observables or {}
    routes = default_jump_routes(model) if jump_routes is None else list(jump_routes)
    if len(routes) != model.num_channels:
        raise ValueError(f"{model.num_channels} channels but {len(routes)} jump routes")
    seed_tuple = tuple(np.atleast_1d(seed).tolist())
    rng = trajectory_rng(list(seed_tuple))
    if isinstance(estimator, Shots):
        mix = np.random.SeedSequence([estimator.seed, *seed_tuple]).generate_state(1)[0]
        estimator = Shots(estimator.shots, int(mix))

    n = max(1, int(round(T / dt)))
    h = T / n
    times = np.linspace(0.0, T, n + 1)
    problem = drift_problem(model, T, dt)
    theta = np.array(theta0, dtype=float)
    obs = {k: np.empty(n + 1) for k in observables}
    thetas = np.empty((n + 1, theta.size)) if record_parameters else None
    jumps: list[tuple[float, int]] = []
    notes: list[str] = []

    def save(i, v):
        for k, op in observables.items():
            obs[k][i] = expectation(op, v).real
        if thetas is not None:
            thetas[i] = theta

    q = rng.random()
    gamma = 0.0
    exact = isinstance(estimator, Exact)
    v, D = ansatz.tangent(theta)
    save(0, v)
    for step in range(n):
        t = times[step]
        rates = model.rates(v)
        total = float(rates.sum())
        if total * h > RATE_WARNING and not notes:
            msg = f"gamma*dt = {total * h:.3g} > {RATE_WARNING} at t={t:.6g}; first-order jump probabilities are inaccurate"
            notes.append(msg)
            warnings.warn(msg, RuntimeWarning, stacklevel=2)
        gamma += total * h
        if np.exp(-gamma) >= q:
            if exact:
                m = assemble_from_tangent(problem, v, D, t)
            else:
                m = assemble(problem, ansatz, theta, t, estimator, step=step)
            dtheta = h * solve_step(m, regularization)
            if not np.all(np.isfinite(dtheta)):
                raise EvolutionError(f"non-finite parameter velocity at t={t:.6g}", step)
            theta = theta + dtheta
        else:
            q_prime = rng.random()
            if total > 0:
                k = select_channel(rates, q_prime)
                if rates[k] < JUMP_FLOOR:
                    raise JumpAnnihilationError(f"channel {k + 1} selected with rate {rates[k]:.3g} at t={t:.6g}")
                route, qubits = routes[k]
                theta = apply_svd_route(route, ansatz, theta, qubits, route_steps, regularization, estimator, check_norm=False)
                jumps.append((float(times[step + 1]), k + 1))
            gamma = 0.0
            q = rng.random()
        v, D = ansatz.tangent(theta)
        save(step + 1, v)
    return TrajectoryRecord(seed_tuple, times, jumps, obs, theta, thetas, notes)


def _run_chunk(args):
    model, ansatz, theta0, T, dt, seeds, kwargs = args
    return [run_trajectory(model, ansatz, theta0, T, dt, s, **kwargs) for s in seeds]


def run_trajectories(
    model: LindbladModel,
    ansatz: Ansatz,
    theta0,
    T: float,
    dt: float,
    n_trajectories: int,
    master_seed: int = 0,
    workers: int = 1,
    progress=None,
    **kwargs,
) -> list[TrajectoryRecord]:
    """Trajectories ``i = 0..n-1`` seeded by ``(master_seed, i)``, returned in index order.

    ``progress`` (optional) is called with the number of finished trajectories.
    """
    seeds = [(master_seed, i) for i in range(n_trajectories)]
    if workers <= 1:
        out = []
        for s in seeds:
            out.append(run_trajectory(model, ansatz, theta0, T, dt, s, **kwargs))
            if progress:
                progress(len(out))
        return out
    chunk = max(1, n_trajectories // (8 * workers))
    jobs = [(model, ansatz, theta0, T, dt, seeds[i : i + chunk], kwargs) for i in range(0, n_trajectories, chunk)]
    out = []
    with ProcessPoolExecutor(max_workers=workers) as pool:
        for res in pool.map(_run_chunk, jobs):
            out.extend(res)
            if progress:
                progress(len(out))
    return out


def average_trajectories(records, observable: str):
    """Per-grid-point ``(times, mean, std_error)`` across trajectories.

    The standard error uses the unbiased sample deviation and is zero for a
    single trajectory.
    """
    if not records:
        raise ValueError("need at least one trajectory")
    times = records[0].times
    for r in records:
        if r.times.shape != times.shape or not np.array_equal(r.times, times):
            raise ValueError("trajectory time grids are not aligned")
    data = np.stack([r.observables[observable] for r in records])
    mean = data.mean(axis=0)
    if len(records) == 1:
        return times, mean, np.zeros_like(mean)
    return times, mean, data.std(axis=0, ddof=1) / np.sqrt(len(records))


# benchmark -------------------------------------------------------------------


def ising_hamiltonian(J: float = 1.0, h_x: float = 1.0, bonds=ISING_BONDS, num_qubits: int = 6) -> OperatorSum:
    zz = " + ".join(f"{J / 4!r}*Z{i - 1} Z{j - 1}" for i, j in bonds)
    xs = " + ".join(f"{h_x!r}*X{q}" for q in range(num_qubits))
    return parse_operator(f"{zz} + {xs}", num_qubits)


def correlation_observable(bonds=ISING_BONDS, num_qubits: int = 6) -> OperatorSum:
    return parse_operator(" + ".join(f"{1 / len(bonds)!r}*Z{i - 1} Z{j - 1}" for i, j in bonds), num_qubits)


def sigma_plus(num_qubits: int, qubit: int, rate: float = 1.0) -> OperatorSum:
    """``sqrt(rate) |1><0|`` on ``qubit``."""
    c = np.sqrt(rate)
    return OperatorSum(
        [
            PauliString.from_dict(num_qubits, {qubit: "X"}, 0.5 * c),
            PauliString.from_dict(num_qubits, {qubit: "Y"}, -0.5j * c),
        ],
        num_qubits,
    )


def build_ising_benchmark(J: float = 1.0, h_x: float = 1.0, gamma: float = 1.0, dissipative: bool = True):
    """``(model, ansatz, C)`` for the six-qubit ladder with ``sqrt(gamma) sigma+`` decay per site."""
    n = 6
    H = ising_hamiltonian(J, h_x)
    ops = [sigma_plus(n, q, gamma) for q in range(n)] if dissipative else []
    return LindbladModel(H, ops), build_hamiltonian_ansatz(), correlation_observable()
