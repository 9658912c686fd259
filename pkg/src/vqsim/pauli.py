"""Pauli strings, Pauli sums and their action on statevectors.

Operators are never materialized as dense matrices here. A Pauli string acts
on a basis state by a bit flip and a sign, so a whole sum is compiled once into
``{flip_mask: diagonal}`` groups and applied with gathers.

Text format (used in config files)::

    0.25*Z0 Z1 + 1.0*X3 - 0.5j*Y2 + (0.1+0.2j)*X0 Y1 + 2*I

Pauli letters are case-insensitive and carry a qubit index suffix.
"""

from __future__ import annotations

import re
from collections.abc import Iterable, Mapping
from dataclasses import dataclass

import numpy as np

from .states import MAX_QUBITS, DimensionError, StateVector, _as_array

DROP_TOL = 1e-14

# (a, b) -> (phase, c) with a*b = phase * c for single-qubit Paulis.
_PRODUCT = {}
for _a in "IXYZ":
    _PRODUCT[("I", _a)] = (1, _a)
    _PRODUCT[(_a, "I")] = (1, _a)
    _PRODUCT[(_a, _a)] = (1, "I")
for _a, _b, _c in (("X", "Y", "Z"), ("Y", "Z", "X"), ("Z", "X", "Y")):
    _PRODUCT[(_a, _b)] = (1j, _c)
    _PRODUCT[(_b, _a)] = (-1j, _c)


def _check_labels(labels: str) -> str:
    labels = labels.upper()
    if set(labels) - set("IXYZ"):
        raise ValueError(f"invalid Pauli labels {labels!r}")
    if len(labels) > MAX_QUBITS:
        raise DimensionError(f"{len(labels)} qubits exceeds {MAX_QUBITS}")
    return labels


@dataclass(frozen=True)
class PauliString:
    """``coefficient * P_{n-1} x ... x P_0``.

    ``labels[q]`` is the Pauli acting on qubit ``q``.
    """

    labels: str
    coefficient: complex = 1.0

    def __post_init__(self):
        object.__setattr__(self, "labels", _check_labels(self.labels))
        object.__setattr__(self, "coefficient", complex(self.coefficient))

    @classmethod
    def from_dict(cls, num_qubits: int, factors: Mapping[int, str], coefficient: complex = 1.0) -> PauliString:
        labels = ["I"] * num_qubits
        for q, p in factors.items():
            if not 0 <= q < num_qubits:
                raise DimensionError(f"qubit {q} out of range for {num_qubits} qubits")
            labels[q] = p
        return cls("".join(labels), coefficient)

    @classmethod
    def identity(cls, num_qubits: int, coefficient: complex = 1.0) -> PauliString:
        return cls("I" * num_qubits, coefficient)

    @property
    def num_qubits(self) -> int:
        return len(self.labels)

    @property
    def is_identity(self) -> bool:
        return set(self.labels) <= {"I"}

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(q for q, p in enumerate(self.labels) if p != "I")

    @property
    def x_mask(self) -> int:
        return sum(1 << q for q, p in enumerate(self.labels) if p in "XY")

    @property
    def z_mask(self) -> int:
        return sum(1 << q for q, p in enumerate(self.labels) if p in "ZY")

    def with_coefficient(self, coefficient: complex) -> PauliString:
        return PauliString(self.labels, coefficient)

    def adjoint(self) -> PauliString:
        return PauliString(self.labels, np.conj(self.coefficient))

    def commutes_with(self, other: PauliString) -> bool:
        anti = sum(
            1 for a, b in zip(self.labels, other.labels) if a != "I" and b != "I" and a != b
        )
        return anti % 2 == 0

    def phases(self) -> np.ndarray:
        """Vector ``d`` with ``(P v)[b] = d[b] * v[b ^ x_mask]`` (unit coefficient)."""
        dim = 1 << self.num_qubits
        flip = self.x_mask
        ny = self.labels.count("Y")
        src = np.arange(dim) ^ flip
        sign = 1 - 2 * (np.bitwise_count(src & self.z_mask).astype(np.int64) & 1)
        return (1j**ny) * sign.astype(complex)

    def __mul__(self, other):
        if isinstance(other, PauliString):
            return multiply(self, other)
        if isinstance(other, OperatorSum):
            return OperatorSum([self]) * other
        return PauliString(self.labels, self.coefficient * complex(other))

    def __rmul__(self, other):
        return PauliString(self.labels, self.coefficient * complex(other))

    def __neg__(self):
        return PauliString(self.labels, -self.coefficient)

    def __str__(self) -> str:
        return format_operator(OperatorSum([self]))


def multiply(a: PauliString, b: PauliString) -> PauliString:
    """Operator product ``a @ b`` as a single Pauli string."""
    if a.num_qubits != b.num_qubits:
        raise DimensionError(f"qubit-count mismatch: {a.num_qubits} vs {b.num_qubits}")
    phase = 1 + 0j
    out = []
    for pa, pb in zip(a.labels, b.labels):
        ph, pc = _PRODUCT[(pa, pb)]
        phase *= ph
        out.append(pc)
    return PauliString("".join(out), a.coefficient * b.coefficient * phase)


@dataclass(frozen=True, eq=False)
class _Compiled:
    perms: tuple
    diags: tuple
    diagonal: np.ndarray | None  # the flip-free group, if any


class OperatorSum:
    """Canonical sum of Pauli strings on a fixed number of qubits.

    Duplicate labels are merged and terms with ``|c| < 1e-14`` are dropped.
    Instances are immutable; the compiled action is cached on first use.
    """

    __slots__ = ("_terms", "_num_qubits", "_compiled", "_hash")

    def __init__(self, terms: Iterable[PauliString], num_qubits: int | None = None):
        merged: dict[str, complex] = {}
        n = num_qubits
        for term in terms:
            if n is None:
                n = term.num_qubits
            elif term.num_qubits != n:
                raise DimensionError(f"term on {term.num_qubits} qubits in a {n}-qubit sum")
            merged[term.labels] = merged.get(term.labels, 0j) + term.coefficient
        if n is None:
            raise ValueError("empty OperatorSum needs an explicit num_qubits")
        self._num_qubits = n
        self._terms = tuple(PauliString(k, c) for k, c in merged.items() if abs(c) >= DROP_TOL)
        self._compiled = None
        self._hash = None

    @classmethod
    def identity(cls, num_qubits: int, coefficient: complex = 1.0) -> OperatorSum:
        return cls([PauliString.identity(num_qubits, coefficient)], num_qubits)

    @classmethod
    def zero(cls, num_qubits: int) -> OperatorSum:
        return cls([], num_qubits)

    @classmethod
    def coerce(cls, op, num_qubits: int | None = None) -> OperatorSum:
        if isinstance(op, OperatorSum):
            return op
        if isinstance(op, PauliString):
            return cls([op])
        if isinstance(op, str):
            if num_qubits is None:
                raise ValueError("parsing an operator literal needs num_qubits")
            return parse_operator(op, num_qubits)
        raise TypeError(f"cannot interpret {type(op).__name__} as an OperatorSum")

    @property
    def terms(self) -> tuple[PauliString, ...]:
        return self._terms

    @property
    def num_qubits(self) -> int:
        return self._num_qubits

    def __len__(self) -> int:
        return len(self._terms)

    def __iter__(self):
        return iter(self._terms)

    def as_dict(self) -> dict[str, complex]:
        return {t.labels: t.coefficient for t in self._terms}

    def adjoint(self) -> OperatorSum:
        return OperatorSum((t.adjoint() for t in self._terms), self._num_qubits)

    def is_hermitian(self, tol: float = 1e-12) -> bool:
        return all(abs(t.coefficient.imag) <= tol for t in self._terms)

    @property
    def is_diagonal(self) -> bool:
        return all(t.x_mask == 0 for t in self._terms)

    @property
    def support(self) -> tuple[int, ...]:
        qs = set()
        for t in self._terms:
            qs.update(t.support)
        return tuple(sorted(qs))

    def identity_coefficient(self) -> complex:
        return self.as_dict().get("I" * self._num_qubits, 0j)

    def without_identity(self) -> OperatorSum:
        return OperatorSum((t for t in self._terms if not t.is_identity), self._num_qubits)

    def pairwise_commuting(self) -> bool:
        ts = self._terms
        return all(ts[i].commutes_with(ts[j]) for i in range(len(ts)) for j in range(i + 1, len(ts)))

    def one_norm(self) -> float:
        return float(sum(abs(t.coefficient) for t in self._terms))

    def embed(self, num_qubits: int, qubits: Iterable[int]) -> OperatorSum:
        """Relabel onto ``qubits`` of a larger register."""
        qubits = list(qubits)
        if len(qubits) != self._num_qubits:
            raise DimensionError("need one target qubit per operator qubit")
        out = []
        for t in self._terms:
            factors = {qubits[q]: p for q, p in enumerate(t.labels) if p != "I"}
            out.append(PauliString.from_dict(num_qubits, factors, t.coefficient))
        return OperatorSum(out, num_qubits)

    # arithmetic --------------------------------------------------------------

    def _other(self, other) -> OperatorSum:
        if isinstance(other, (OperatorSum, PauliString)):
            other = OperatorSum.coerce(other)
        else:
            other = OperatorSum.identity(self._num_qubits, complex(other))
        if other.num_qubits != self._num_qubits:
            raise DimensionError(f"qubit-count mismatch: {self._num_qubits} vs {other.num_qubits}")
        return other

    def __add__(self, other) -> OperatorSum:
        return OperatorSum(self._terms + self._other(other).terms, self._num_qubits)

    __radd__ = __add__

    def __sub__(self, other) -> OperatorSum:
        return self + (-1) * self._other(other)

    def __rsub__(self, other) -> OperatorSum:
        return self._other(other) - self

    def __neg__(self) -> OperatorSum:
        return (-1) * self

    def __mul__(self, other) -> OperatorSum:
        if isinstance(other, (OperatorSum, PauliString)):
            other = self._other(other)
            return OperatorSum(
                (multiply(a, b) for a in self._terms for b in other.terms), self._num_qubits
            )
        c = complex(other)
        return OperatorSum((t.with_coefficient(t.coefficient * c) for t in self._terms), self._num_qubits)

    def __rmul__(self, other) -> OperatorSum:
        if isinstance(other, PauliString):
            return OperatorSum([other]) * self
        return self * other

    def __truediv__(self, other) -> OperatorSum:
        return self * (1.0 / complex(other))

    def __eq__(self, other) -> bool:
        if not isinstance(other, OperatorSum):
            return NotImplemented
        return self._num_qubits == other._num_qubits and self.as_dict() == other.as_dict()

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash((self._num_qubits, frozenset(self.as_dict().items())))
        return self._hash

    def allclose(self, other: OperatorSum, atol: float = 1e-12) -> bool:
        a, b = self.as_dict(), other.as_dict()
        return all(abs(a.get(k, 0) - b.get(k, 0)) <= atol for k in set(a) | set(b))

    def __repr__(self) -> str:
        return f"OperatorSum({format_operator(self)!r}, num_qubits={self._num_qubits})"

    def __str__(self) -> str:
        return format_operator(self)

    # action ------------------------------------------------------------------

    def compiled(self) -> _Compiled:
        if self._compiled is None:
            dim = 1 << self._num_qubits
            groups: dict[int, np.ndarray] = {}
            for t in self._terms:
                d = groups.setdefault(t.x_mask, np.zeros(dim, dtype=complex))
                d += t.coefficient * t.phases()
            diagonal = groups.pop(0, None)
            idx = np.arange(dim)
            flips = sorted(groups)
            self._compiled = _Compiled(
                perms=tuple(idx ^ f for f in flips),
                diags=tuple(groups[f] for f in flips),
                diagonal=diagonal,
            )
        return self._compiled

    def act(self, v: np.ndarray) -> np.ndarray:
        """Apply to a raw vector, or column-wise to a ``(2**n, m)`` array."""
        c = self.compiled()
        if v.shape[0] != 1 << self._num_qubits:
            raise DimensionError(f"operator on {self._num_qubits} qubits, vector of length {v.shape[0]}")
        col = v.ndim == 2
        if c.diagonal is not None:
            out = (c.diagonal[:, None] if col else c.diagonal) * v
        else:
            out = np.zeros(v.shape, dtype=complex)
        for perm, d in zip(c.perms, c.diags):
            out += (d[:, None] if col else d) * v[perm]
        return out


def apply(op, state):
    """Apply a Pauli sum (or string) to a state; returns the same kind of object.

    The result is generally unnormalized. The input is never modified.
    """
    op = OperatorSum.coerce(op)
    out = op.act(_as_array(state))
    return StateVector(out) if isinstance(state, StateVector) else out


def expectation(op, state, raw: bool = False) -> complex:
    """``<psi|op|psi>``, divided by ``<psi|psi>`` unless ``raw``."""
    op = OperatorSum.coerce(op)
    v = _as_array(state)
    val = complex(np.vdot(v, op.act(v)))
    if raw:
        return val
    return val / float(np.vdot(v, v).real)


def pauli_decompose(matrix: np.ndarray) -> OperatorSum:
    """Pauli expansion of a small dense ``2**k x 2**k`` matrix.

    Coefficients are ``Tr(P^dag A) / 2**k``, read off with the same bit rules
    used by :meth:`OperatorSum.act`.
    """
    matrix = np.asarray(matrix, dtype=complex)
    dim = matrix.shape[0]
    k = dim.bit_length() - 1
    if matrix.shape != (dim, dim) or 1 << k != dim:
        raise DimensionError(f"expected a square power-of-two matrix, got {matrix.shape}")
    rows = np.arange(dim)
    terms = []
    for code in range(4**k):
        labels = "".join("IXYZ"[(code >> (2 * q)) & 3] for q in range(k))
        p = PauliString(labels)
        # P has entry d[b] at (b, b ^ flip)
        entries = matrix[rows, rows ^ p.x_mask]
        coef = np.sum(np.conj(p.phases()) * entries) / dim
        if abs(coef) >= DROP_TOL:
            terms.append(p.with_coefficient(coef))
    return OperatorSum(terms, k)


# text format ----------------------------------------------------------------

_TOKEN = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<paren>\([^()]*\))
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?[jJ]?)
  | (?P<pauli>[IXYZixyz]\d*)
  | (?P<op>[+\-*])
    """,
    re.VERBOSE,
)


def _tokenize(text: str):
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ValueError(f"unexpected character {text[pos]!r} at column {pos} in {text!r}")
        pos = m.end()
        if m.lastgroup != "ws":
            yield m.lastgroup, m.group()


def parse_operator(text: str, num_qubits: int) -> OperatorSum:
    """Parse the operator literal format described in the module docstring."""
    tokens = list(_tokenize(text))
    if not tokens:
        raise ValueError("empty operator literal")
    terms = []
    i = 0
    while i < len(tokens):
        sign = 1
        while i < len(tokens) and tokens[i][0] == "op" and tokens[i][1] in "+-":
            if tokens[i][1] == "-":
                sign = -sign
            i += 1
        coef = complex(sign)
        factors: list[tuple[int, str]] = []
        seen_any = False
        while i < len(tokens) and not (tokens[i][0] == "op" and tokens[i][1] in "+-"):
            kind, val = tokens[i]
            if kind in ("num", "paren"):
                try:
                    coef *= complex(val.replace(" ", ""))
                except ValueError as exc:
                    raise ValueError(f"bad coefficient {val!r} in {text!r}") from exc
            elif kind == "pauli":
                letter, idx = val[0].upper(), val[1:]
                if idx == "":
                    if letter != "I":
                        raise ValueError(f"Pauli {letter!r} needs a qubit index in {text!r}")
                else:
                    q = int(idx)
                    if q >= num_qubits:
                        raise ValueError(f"qubit index {q} out of range for {num_qubits} qubits in {text!r}")
                    if letter != "I":
                        factors.append((q, letter))
            # '*' separators are implicit
            seen_any = True
            i += 1
        if not seen_any:
            raise ValueError(f"dangling operator sign in {text!r}")
        term = PauliString.identity(num_qubits, coef)
        for q, letter in factors:
            term = multiply(term, PauliString.from_dict(num_qubits, {q: letter}))
        terms.append(term)
    return OperatorSum(terms, num_qubits)


def _format_coef(c: complex) -> str:
    if c.imag == 0:
        return repr(c.real)
    if c.real == 0:
        return f"{c.imag!r}j"
    return f"({c.real!r}{c.imag:+}j)"


def format_operator(op: OperatorSum) -> str:
    if len(op) == 0:
        return "0*I"
    parts = []
    for t in op.terms:
        body = " ".join(f"{p}{q}" for q, p in enumerate(t.labels) if p != "I") or "I"
        parts.append(f"{_format_coef(t.coefficient)}*{body}")
    return " + ".join(parts)
