"""Hadamard-test primitive ``a * Re(exp(i theta) <0|U_left^dag U_right|0>)``.

The ancilla circuit is not simulated gate by gate. The exact amplitude fixes
the ancilla outcome distribution ``P(0) = (1 + Re(...)) / 2`` and shots are
drawn from that binomial law, which is the same distribution a full
simulation with one extra qubit would produce.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .pauli import OperatorSum, PauliString
from .states import DimensionError

# Template tag -> number of ancilla-controlled operations in the circuit.
CONTROLLED_OPS = {
    "S1a": 2,  # <R_k,p | R_j,q>: two controlled Pauli insertions
    "S1b": 2,  # <phi | sigma | R_j,q>-type with one insertion on each branch
    "S2": 3,  # B^dag B string inserted between two derivative branches
    "S3": 3,  # drive onto a distinct preparation unitary
    "S4": 3,  # drive onto the ansatz state itself
    "expectation": 0,  # plain Pauli expectation, no interferometer needed
}


@dataclass(frozen=True)
class Rotation:
    """``exp(-i angle G)`` for a ParamGate ``G``."""

    gate: object
    angle: float


@dataclass(eq=False)
class Circuit:
    """A normalized input state followed by an ordered list of unitaries.

    ``ops`` holds :class:`Rotation` and unit-modulus :class:`PauliString`
    insertions. The output state is computed once and cached.
    """

    reference: np.ndarray
    ops: tuple = ()
    _state: np.ndarray | None = field(default=None, init=False, repr=False)

    @property
    def num_qubits(self) -> int:
        return int(np.asarray(self.reference).size).bit_length() - 1

    def state(self) -> np.ndarray:
        if self._state is None:
            psi = np.array(self.reference, dtype=complex)
            for op in self.ops:
                if isinstance(op, Rotation):
                    op.gate.apply_(psi, op.angle)
                elif isinstance(op, PauliString):
                    if abs(abs(op.coefficient) - 1) > 1e-12:
                        raise ValueError("inserted Pauli strings must be unitary")
                    psi = OperatorSum([op]).act(psi)
                else:
                    raise TypeError(f"unsupported circuit element {op!r}")
            self._state = psi
        return self._state

    @classmethod
    def from_state(cls, state) -> Circuit:
        """Treat an already-computed normalized state as a black-box preparation."""
        c = cls(np.asarray(state, dtype=complex))
        c._state = c.reference
        return c


@dataclass(frozen=True, eq=False)
class OverlapTask:
    left: Circuit
    right: Circuit
    phase: float = 0.0
    scale: float = 1.0
    template: str = "S1a"

    def __post_init__(self):
        if self.left.num_qubits != self.right.num_qubits:
            raise DimensionError(f"circuits on {self.left.num_qubits} and {self.right.num_qubits} qubits")

    def amplitude(self) -> complex:
        return complex(np.vdot(self.left.state(), self.right.state()))


def exact_overlap(task: OverlapTask) -> float:
    return float(task.scale * (np.exp(1j * task.phase) * task.amplitude()).real)


def sampled_overlap(task: OverlapTask, shots: int, rng) -> tuple[float, float]:
    """Finite-shot Hadamard-test estimate and its binomial standard error.

    ``rng`` is a seed or a ``numpy.random.Generator``.
    """
    shots = int(shots)
    if shots < 1:
        raise ValueError("shots must be a positive integer")
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    re = (np.exp(1j * task.phase) * task.amplitude()).real
    p0 = min(1.0, max(0.0, 0.5 * (1.0 + re)))
    p_hat = rng.binomial(shots, p0) / shots
    a = task.scale
    return float(a * (2 * p_hat - 1)), float(abs(a) * 2 * np.sqrt(p_hat * (1 - p_hat) / shots))


def controlled_op_count(task: OverlapTask) -> int:
    try:
        return CONTROLLED_OPS[task.template]
    except KeyError:
        raise ValueError(f"unclassifiable task template {task.template!r}") from None


def weighted_task(left: Circuit, right: Circuit, coefficient: complex, template: str) -> OverlapTask:
    """Task for ``Re(coefficient * <left|right>)``."""
    return OverlapTask(left, right, float(np.angle(coefficient)), float(abs(coefficient)), template)
