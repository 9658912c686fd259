"""Brute-force reference solvers.

Everything here is deliberately naive: operators are materialized as dense
``2**n x 2**n`` matrices through explicit Kronecker products and integrated
with classical RK4. None of it shares code with the variational path beyond
the Pauli-string data type.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce

import numpy as np
from scipy.linalg import expm

_SINGLE = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}
MAX_ORACLE_QUBITS = 10


def _check_size(n: int, limit: int = MAX_ORACLE_QUBITS) -> None:
    if n > limit:
        raise OverflowError(f"dense oracle limited to {limit} qubits, got {n}")


def to_dense(op) -> np.ndarray:
    """Dense matrix of an OperatorSum or PauliString by term-wise kron products.

    The kron order puts qubit ``n-1`` leftmost so qubit 0 is the least
    significant index bit.
    """
    terms = op.terms if hasattr(op, "terms") else [op]
    n = op.num_qubits
    _check_size(n, 12)
    out = np.zeros((1 << n, 1 << n), dtype=complex)
    for t in terms:
        out += t.coefficient * reduce(np.kron, [_SINGLE[p] for p in reversed(t.labels)])
    return out


@dataclass(frozen=True)
class DenseOperator:
    entries: np.ndarray

    @classmethod
    def from_operator(cls, op) -> DenseOperator:
        return cls(to_dense(op))

    def __matmul__(self, other):
        return self.entries @ np.asarray(other)


def _rk4(f, y0, t_final: float, dt: float):
    n = max(1, int(round(t_final / dt)))
    h = t_final / n
    ys = np.empty((n + 1,) + y0.shape, dtype=complex)
    ys[0] = y = y0
    for i in range(n):
        k1 = f(y)
        k2 = f(y + 0.5 * h * k1)
        k3 = f(y + 0.5 * h * k2)
        k4 = f(y + h * k3)
        y = y + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        ys[i + 1] = y
    return np.linspace(0.0, t_final, n + 1), ys


def exact_schrodinger(H, psi0, T: float, dt: float):
    """RK4 solution of ``d psi/dt = -i H psi``; returns ``(times, states)``."""
    _check_size(H.num_qubits)
    h = to_dense(H)
    return _rk4(lambda y: -1j * (h @ y), np.array(psi0, dtype=complex), T, dt)


def propagate_expm(H, psi0, t: float) -> np.ndarray:
    return expm(-1j * t * to_dense(H)) @ np.array(psi0, dtype=complex)


def lindblad_rhs(h: np.ndarray, ls: list[np.ndarray]):
    damp = sum((l.conj().T @ l for l in ls), np.zeros_like(h))

    def f(rho):
        out = -1j * (h @ rho - rho @ h)
        for l in ls:
            out += l @ rho @ l.conj().T
        out -= 0.5 * (damp @ rho + rho @ damp)
        return out

    return f


def exact_lindblad(model, rho0, T: float, dt: float):
    """RK4 solution of the Lindblad equation; returns ``(times, density matrices)``.

    ``model`` needs ``H`` and ``lindblad_ops`` attributes.
    """
    _check_size(model.H.num_qubits, 6)
    h = to_dense(model.H)
    ls = [to_dense(l) for l in model.lindblad_ops]
    rho0 = np.array(rho0, dtype=complex)
    if rho0.ndim == 1:
        rho0 = np.outer(rho0, rho0.conj())
    return _rk4(lindblad_rhs(h, ls), rho0, T, dt)


def ground_energy(H) -> float:
    return float(np.linalg.eigvalsh(to_dense(H))[0])


@dataclass
class OracleTrajectories:
    times: np.ndarray
    values: dict[str, np.ndarray]  # name -> (n_traj, n_times)
    jumps: list[list[tuple[float, int]]]  # (time, 1-based channel) per trajectory
    final_states: np.ndarray


def exact_trajectories(model, psi0, T: float, dt: float, seeds, observables: dict | None = None):
    """Ansatz-free jump trajectories, one per seed, advanced together.

    Per step each trajectory either drifts with the first-order update
    ``(1 - i H dt - (L - <L>) dt) psi`` and renormalizes, or, when
    ``exp(-Gamma) < q``, jumps with the exact normalized ``L_k psi``. A seed
    is anything ``numpy.random.SeedSequence`` accepts; randomness comes from
    ``Generator(Philox(SeedSequence(seed)))`` with draws ``q`` at start and
    ``q'`` then ``q`` at every jump.
    """
    _check_size(model.H.num_qubits)
    observables = observables or {}
    h = to_dense(model.H)
    ls = [to_dense(l) for l in model.lindblad_ops]
    ldl = [l.conj().T @ l for l in ls]
    big_l = 0.5 * sum(ldl, np.zeros_like(h))
    obs = {k: to_dense(o) for k, o in observables.items()}
    seeds = list(seeds)
    m = len(seeds)
    n = max(1, int(round(T / dt)))
    h_step = T / n
    times = np.linspace(0.0, T, n + 1)

    rngs = [np.random.Generator(np.random.Philox(np.random.SeedSequence(s))) for s in seeds]
    q = np.array([r.random() for r in rngs])
    gamma = np.zeros(m)
    psi = np.tile(np.array(psi0, dtype=complex), (m, 1))
    psi /= np.linalg.norm(psi, axis=1, keepdims=True)
    values = {k: np.empty((m, n + 1)) for k in obs}
    jumps: list[list[tuple[float, int]]] = [[] for _ in range(m)]

    def quad(a, p):
        # row-wise <p|a|p>
        return np.sum(p.conj() * (p @ a.T), axis=1).real

    def record(i):
        for k, o in obs.items():
            values[k][:, i] = quad(o, psi)

    record(0)
    for step in range(n):
        rates = np.stack([quad(a, psi) for a in ldl], axis=1) if ls else np.zeros((m, 0))
        total = rates.sum(axis=1)
        gamma += total * h_step
        jump = np.exp(-gamma) < q
        drift = ~jump
        if drift.any():
            p = psi[drift]
            lexp = quad(big_l, p)
            new = p - h_step * (1j * p @ h.T + p @ big_l.T - lexp[:, None] * p)
            psi[drift] = new / np.linalg.norm(new, axis=1, keepdims=True)
        for i in np.flatnonzero(jump):
            qp = rngs[i].random()
            if total[i] > 0:
                cum = np.cumsum(rates[i]) / total[i]
                cum[-1] = 1.0
                k = int(np.searchsorted(cum, qp, side="right"))
                new = ls[k] @ psi[i]
                psi[i] = new / np.linalg.norm(new)
                jumps[i].append((float(times[step + 1]), k + 1))
            gamma[i] = 0.0
            q[i] = rngs[i].random()
        record(step + 1)
    return OracleTrajectories(times, values, jumps, psi)


def exact_trajectory(model, psi0, T: float, dt: float, seed, observables: dict | None = None):
    """Single-seed version of :func:`exact_trajectories`."""
    res = exact_trajectories(model, psi0, T, dt, [seed], observables)
    return OracleTrajectories(res.times, {k: v[0] for k, v in res.values.items()}, res.jumps[0], res.final_states[0])
