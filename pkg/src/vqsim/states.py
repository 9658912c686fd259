"""Dense statevectors.

Qubit 0 is the least-significant bit of the amplitude index: the basis state
``|b_{n-1} ... b_1 b_0>`` sits at index ``sum_q b_q 2**q``. Every module in the
package uses this convention.
"""

from __future__ import annotations

import numpy as np

MAX_QUBITS = 16


class DimensionError(ValueError):
    """Raised when objects acting on different qubit counts are combined."""


def _as_array(state) -> np.ndarray:
    if isinstance(state, StateVector):
        return state.amplitudes
    return np.asarray(state, dtype=complex)


def qubits_for_dimension(dim: int) -> int:
    n = int(dim).bit_length() - 1
    if dim < 1 or 1 << n != dim:
        raise DimensionError(f"length {dim} is not a power of two")
    if n > MAX_QUBITS:
        raise DimensionError(f"{n} qubits exceeds the supported maximum of {MAX_QUBITS}")
    return n


class StateVector:
    """Immutable complex amplitude vector over ``num_qubits`` qubits."""

    __slots__ = ("amplitudes",)

    def __init__(self, amplitudes):
        arr = np.array(amplitudes, dtype=complex).reshape(-1)
        qubits_for_dimension(arr.size)
        arr.flags.writeable = False
        self.amplitudes = arr

    @classmethod
    def basis(cls, num_qubits: int, index: int | str = 0) -> StateVector:
        """Computational basis state.

        ``index`` may be an integer or a bitstring written most-significant
        qubit first, so ``"10"`` on two qubits is qubit 1 set.
        """
        if isinstance(index, str):
            if len(index) != num_qubits or set(index) - {"0", "1"}:
                raise ValueError(f"bad bitstring {index!r} for {num_qubits} qubits")
            index = int(index, 2)
        amps = np.zeros(1 << num_qubits, dtype=complex)
        amps[index] = 1.0
        return cls(amps)

    @classmethod
    def random(cls, num_qubits: int, rng: np.random.Generator | int | None = None) -> StateVector:
        """Haar-random normalized state."""
        rng = np.random.default_rng(rng)
        dim = 1 << num_qubits
        amps = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
        return cls(amps / np.linalg.norm(amps))

    @property
    def num_qubits(self) -> int:
        return self.amplitudes.size.bit_length() - 1

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def normalized(self) -> StateVector:
        nrm = self.norm()
        if nrm == 0.0:
            raise ZeroDivisionError("cannot normalize the zero vector")
        return StateVector(self.amplitudes / nrm)

    def __array__(self, dtype=None, copy=None):
        if dtype is None:
            return self.amplitudes.copy()
        return self.amplitudes.astype(dtype)

    def __len__(self) -> int:
        return self.amplitudes.size

    def __repr__(self) -> str:
        return f"StateVector(num_qubits={self.num_qubits}, norm={self.norm():.6g})"


def inner(a, b) -> complex:
    """Return <a|b>, conjugate-linear in ``a``."""
    va, vb = _as_array(a), _as_array(b)
    if va.shape != vb.shape:
        raise DimensionError(f"dimension mismatch: {va.shape} vs {vb.shape}")
    return complex(np.vdot(va, vb))


def fidelity(a, b) -> float:
    """Squared overlap of the normalized versions of ``a`` and ``b``."""
    va, vb = _as_array(a), _as_array(b)
    num = abs(np.vdot(va, vb)) ** 2
    den = np.vdot(va, va).real * np.vdot(vb, vb).real
    return float(num / den)
