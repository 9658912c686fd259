"""Parameterized circuits ``alpha * R_N(theta_N) ... R_1(theta_1) |ref>``.

Every gate is ``exp(-i * theta * G)`` with a Hermitian Pauli-sum generator
``G = sum_i c_i sigma_i``, so its derivative decomposes as
``dR/dtheta = sum_i (-i c_i) R sigma_i``. Gates may share an angle slot.

With ``scale=True`` two extra real parameters ``(r, phi)`` are appended to the
parameter vector and the prepared vector is ``r * exp(i phi) * |phi(theta)>``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _kernels
from .pauli import OperatorSum, PauliString, parse_operator, format_operator
from .states import DimensionError, StateVector

# Six-qubit ladder bonds, 1-based qubit labels.
ISING_BONDS = ((5, 6), (3, 5), (4, 6), (3, 4), (1, 3), (2, 4), (1, 2))


@dataclass(frozen=True, eq=False)
class ParamGate:
    """``exp(-i * theta[slot] * generator)``."""

    generator: OperatorSum
    slot: int

    def __post_init__(self):
        gen = self.generator
        if not gen.is_hermitian():
            raise ValueError(f"gate generator must be Hermitian, got {gen}")
        gen = OperatorSum((t.with_coefficient(t.coefficient.real) for t in gen.terms), gen.num_qubits)
        object.__setattr__(self, "generator", gen)
        if gen.is_diagonal:
            diag = gen.compiled().diagonal
            kind = "diagonal"
            data = np.zeros(1 << gen.num_qubits) if diag is None else diag.real.copy()
        elif gen.pairwise_commuting():
            kind = "commuting"
            data = [(t.coefficient.real, np.arange(1 << gen.num_qubits) ^ t.x_mask, t.phases()) for t in gen.terms]
        else:
            kind = "dense"
            dense = gen.act(np.eye(1 << gen.num_qubits, dtype=complex))
            data = np.linalg.eigh(dense)
        object.__setattr__(self, "_kind", kind)
        object.__setattr__(self, "_data", data)

    @property
    def num_qubits(self) -> int:
        return self.generator.num_qubits

    def decomposition(self) -> list[tuple[complex, PauliString]]:
        """Pairs ``(g_i, sigma_i)`` with ``dR/dtheta = sum_i g_i R sigma_i``."""
        return [(-1j * t.coefficient.real, t.with_coefficient(1.0)) for t in self.generator.terms]

    def apply_(self, cols: np.ndarray, theta: float) -> None:
        """Apply the gate in place to a vector or to every column of ``cols``."""
        col = cols.ndim == 2
        if self._kind == "diagonal":
            ph = np.exp(-1j * theta * self._data)
            cols *= ph[:, None] if col else ph
        elif self._kind == "commuting":
            for c, perm, d in self._data:
                a = np.cos(theta * c)
                b = -1j * np.sin(theta * c)
                flipped = cols[perm]
                flipped *= (b * d)[:, None] if col else b * d
                cols *= a
                cols += flipped
        else:
            w, v = self._data
            u = (v * np.exp(-1j * theta * w)) @ v.conj().T
            cols[...] = u @ cols

    def matrix(self, theta: float) -> np.ndarray:
        out = np.eye(1 << self.num_qubits, dtype=complex)
        self.apply_(out, theta)
        return out


@dataclass(eq=False)
class Ansatz:
    """Reference state, ordered gates and an optional complex global scale."""

    reference: StateVector
    gates: list[ParamGate]
    scale: bool = False
    name: str = ""
    _slot_matrix: np.ndarray | None = field(default=None, init=False, repr=False)
    _program: tuple | None = field(default=None, init=False, repr=False)

    def __post_init__(self):
        if not isinstance(self.reference, StateVector):
            self.reference = StateVector(self.reference)
        n = self.reference.num_qubits
        for g in self.gates:
            if g.num_qubits != n:
                raise DimensionError(f"gate on {g.num_qubits} qubits in a {n}-qubit ansatz")
        slots = sorted({g.slot for g in self.gates})
        if slots != list(range(len(slots))):
            raise ValueError(f"angle slots must be 0..N-1 without gaps, got {slots}")
        self.num_circuit_parameters = len(slots)
        gate_slots = [g.slot for g in self.gates]
        if gate_slots != list(range(len(self.gates))):
            inc = np.zeros((len(self.gates), len(slots)))
            inc[np.arange(len(self.gates)), gate_slots] = 1.0
            self._slot_matrix = inc
        self._gate_slots = np.array(gate_slots, dtype=np.int64)
        if all(g._kind != "dense" for g in self.gates):
            starts, xs, coefs, phases = [0], [], [], []
            for g in self.gates:
                for t in g.generator.terms:
                    xs.append(t.x_mask)
                    coefs.append(t.coefficient.real)
                    phases.append(t.phases())
                starts.append(len(xs))
            dim = self.reference.dim
            self._program = (
                np.array(starts, dtype=np.int64),
                np.array(xs, dtype=np.int64),
                np.array(coefs, dtype=float),
                np.array(phases, dtype=complex).reshape(len(xs), dim),
            )

    @property
    def num_qubits(self) -> int:
        return self.reference.num_qubits

    @property
    def num_parameters(self) -> int:
        return self.num_circuit_parameters + (2 if self.scale else 0)

    def initial_parameters(self, r: float = 1.0, phase: float = 0.0) -> np.ndarray:
        theta = np.zeros(self.num_parameters)
        if self.scale:
            theta[-2:] = r, phase
        return theta

    def _split(self, theta) -> tuple[np.ndarray, complex]:
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.num_parameters,):
            raise ValueError(f"expected {self.num_parameters} parameters, got shape {theta.shape}")
        if self.scale:
            r, phase = theta[-2:]
            return theta[:-2], r * np.exp(1j * phase)
        return theta, 1.0 + 0j

    def circuit_state(self, theta) -> np.ndarray:
        """Normalized ``|phi(theta_1)>`` as a raw array (scale ignored)."""
        angles, _ = self._split(theta)
        if self._program is not None:
            return _kernels.circuit_state(self.reference.amplitudes, angles[self._gate_slots], *self._program)
        psi = self.reference.amplitudes.copy()
        for g in self.gates:
            g.apply_(psi, angles[g.slot])
        return psi

    def prepare(self, theta) -> StateVector:
        _, alpha = self._split(theta)
        return StateVector(alpha * self.circuit_state(theta))

    def circuit_jacobian(self, theta) -> tuple[np.ndarray, np.ndarray]:
        """``(|phi>, J)`` with ``J[:, s] = d|phi>/dtheta_s`` over circuit slots.

        One forward sweep: after gate ``k`` acts, ``-i G_k |psi_k>`` is appended
        as a new column and every later gate acts on all live columns.
        """
        angles, _ = self._split(theta)
        n_gates = len(self.gates)
        if self._program is not None:
            work = np.empty((self.reference.dim, n_gates + 1), dtype=complex)
            _kernels.forward_sweep(self.reference.amplitudes, angles[self._gate_slots], *self._program, work)
        else:
            work = np.empty((self.reference.dim, n_gates + 1), dtype=complex)
            work[:, 0] = self.reference.amplitudes
            for k, g in enumerate(self.gates):
                g.apply_(work[:, : k + 1], angles[g.slot])
                work[:, k + 1] = g.generator.act(work[:, 0])
                work[:, k + 1] *= -1j
        psi = work[:, 0].copy()
        jac = work[:, 1:]
        if self._slot_matrix is not None:
            jac = jac @ self._slot_matrix
        return psi, jac

    def tangent(self, theta) -> tuple[np.ndarray, np.ndarray]:
        """``(|v>, D)`` where ``D[:, k] = d|v>/dtheta_k`` over all parameters."""
        psi, jac = self.circuit_jacobian(theta)
        if not self.scale:
            return psi, jac
        _, alpha = self._split(theta)
        phase = alpha / abs(alpha) if alpha != 0 else np.exp(1j * np.asarray(theta)[-1])
        v = alpha * psi
        cols = np.empty((psi.size, self.num_parameters), dtype=complex)
        cols[:, :-2] = alpha * jac
        cols[:, -2] = phase * psi
        cols[:, -1] = 1j * v
        return v, cols

    def derivative_state(self, theta, k: int) -> StateVector:
        if not 0 <= k < self.num_parameters:
            raise IndexError(f"parameter index {k} out of range for {self.num_parameters} parameters")
        _, cols = self.tangent(theta)
        return StateVector(cols[:, k])

    def insertion_state(self, theta, gate_index: int, sigma: PauliString) -> np.ndarray:
        """``R_N ... R_k sigma R_{k-1} ... R_1 |ref>`` with ``sigma`` after gate ``gate_index``.

        Gates commute with their own generator terms, so placing ``sigma`` just
        after gate ``k`` equals the ``R_k sigma_{k,i}`` ordering.
        """
        angles, _ = self._split(theta)
        psi = self.reference.amplitudes.copy()
        for k, g in enumerate(self.gates):
            g.apply_(psi, angles[g.slot])
            if k == gate_index:
                psi = OperatorSum([sigma]).act(psi)
        return psi

    # serialization --------------------------------------------------------

    def to_dict(self) -> dict:
        ref = self.reference.amplitudes
        nz = np.flatnonzero(np.abs(ref) > 0)
        out = {"num_qubits": self.num_qubits, "name": self.name, "scale": self.scale}
        if nz.size == 1 and abs(ref[nz[0]] - 1) < 1e-15:
            out["reference"] = format(int(nz[0]), f"0{self.num_qubits}b")
        else:
            out["reference_amplitudes"] = [[float(a.real), float(a.imag)] for a in ref]
        out["gates"] = [{"generator": format_operator(g.generator), "slot": g.slot} for g in self.gates]
        return out

    @classmethod
    def from_dict(cls, data: dict) -> Ansatz:
        n = int(data["num_qubits"])
        if "reference_amplitudes" in data:
            ref = StateVector([complex(re, im) for re, im in data["reference_amplitudes"]])
        else:
            ref = StateVector.basis(n, data.get("reference", "0" * n))
        gates = [ParamGate(parse_operator(g["generator"], n), int(g["slot"])) for g in data["gates"]]
        return cls(ref, gates, scale=bool(data.get("scale", False)), name=data.get("name", ""))


def load_ansatz(path) -> Ansatz:
    with open(path) as fh:
        return Ansatz.from_dict(json.load(fh))


def save_ansatz(ansatz: Ansatz, path) -> None:
    Path(path).write_text(json.dumps(ansatz.to_dict(), indent=2) + "\n")


# builders --------------------------------------------------------------------


def _zz(n: int, pairs) -> OperatorSum:
    return OperatorSum([PauliString.from_dict(n, {i - 1: "Z", j - 1: "Z"}) for i, j in pairs], n)


def _xs(n: int, qubits) -> OperatorSum:
    return OperatorSum([PauliString.from_dict(n, {q - 1: "X"}) for q in qubits], n)


def build_hamiltonian_ansatz(bonds=ISING_BONDS, ha_blocks=(3, 3)) -> Ansatz:
    """Hamiltonian ansatz of the six-qubit ladder, sandwiched with R_X layers.

    Layout: ``HA HA HA RX HA HA HA RX`` from ``|000000>``. Each HA block is,
    in application order, ``X1+X2+X5+X6``, ``X3+X4``, ``Z1Z2``,
    ``Z1Z3+Z2Z4``, ``Z3Z4``, ``Z3Z5+Z4Z6``, ``Z5Z6``, each with its own angle.
    All gates are ``exp(-i theta G)``. Total: 6*7 + 2*6 = 54 parameters.
    """
    if {frozenset(b) for b in bonds} != {frozenset(b) for b in ISING_BONDS}:
        raise ValueError(f"unsupported layout {bonds}; only the six-qubit ladder is implemented")
    n = 6
    block = [
        _xs(n, (1, 2, 5, 6)),
        _xs(n, (3, 4)),
        _zz(n, [(1, 2)]),
        _zz(n, [(1, 3), (2, 4)]),
        _zz(n, [(3, 4)]),
        _zz(n, [(3, 5), (4, 6)]),
        _zz(n, [(5, 6)]),
    ]
    rx = [_xs(n, (q,)) for q in range(1, n + 1)]
    gens = []
    for n_ha in ha_blocks:
        for _ in range(n_ha):
            gens.extend(block)
        gens.extend(rx)
    gates = [ParamGate(g, k) for k, g in enumerate(gens)]
    return Ansatz(StateVector.basis(n, 0), gates, name="ising-hamiltonian-ansatz")


def pauli_rotation_ansatz(reference, scale: bool = False, layers: int = 1) -> Ansatz:
    """Every non-identity Pauli rotation on the register, ``layers`` times.

    At generic parameters the tangent vectors ``-i P |phi>`` span every
    direction orthogonal (in the real sense) to ``|phi>``, so with
    ``scale=True`` the family reaches any vector near the reference.
    """
    if not isinstance(reference, StateVector):
        reference = StateVector(reference)
    ref = reference.normalized()
    n = ref.num_qubits
    gens = []
    for _ in range(layers):
        for code in range(1, 4**n):
            labels = "".join("IXYZ"[(code >> (2 * q)) & 3] for q in range(n))
            gens.append(OperatorSum([PauliString(labels)]))
    gates = [ParamGate(g, k) for k, g in enumerate(gens)]
    return Ansatz(ref, gates, scale=scale, name=f"pauli-rotations-{n}q")


def single_qubit_ansatz(reference=None, generators=("Y", "Z", "X"), scale: bool = False) -> Ansatz:
    """Euler-angle style single-qubit circuit, gates applied in the given order."""
    ref = StateVector.basis(1, 0) if reference is None else reference
    gates = [ParamGate(parse_operator(f"{g}0" if g != "I" else "I", 1), k) for k, g in enumerate(generators)]
    return Ansatz(ref if isinstance(ref, StateVector) else StateVector(ref), gates, scale=scale)
