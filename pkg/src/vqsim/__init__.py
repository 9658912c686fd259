"""Classical simulator for variational quantum simulation of general processes."""

__version__ = "0.1.0"

from .ansatz import Ansatz, ParamGate, build_hamiltonian_ansatz, pauli_rotation_ansatz, single_qubit_ansatz
from .engine import (
    INITIAL,
    SELF,
    Exact,
    GeneralizedEvolutionProblem,
    Shots,
    StepMatrices,
    Term,
    Tikhonov,
    TruncatedSpectrum,
    assemble,
    evolve,
    imag_time_coeffs,
    real_time_coeffs,
    solve_step,
)
from .pauli import OperatorSum, PauliString, apply, expectation, multiply, parse_operator
from .states import StateVector, fidelity, inner

__all__ = [
    "Ansatz",
    "Exact",
    "GeneralizedEvolutionProblem",
    "INITIAL",
    "OperatorSum",
    "ParamGate",
    "PauliString",
    "SELF",
    "Shots",
    "StateVector",
    "StepMatrices",
    "Term",
    "Tikhonov",
    "TruncatedSpectrum",
    "apply",
    "assemble",
    "build_hamiltonian_ansatz",
    "evolve",
    "expectation",
    "fidelity",
    "imag_time_coeffs",
    "inner",
    "multiply",
    "parse_operator",
    "pauli_rotation_ansatz",
    "real_time_coeffs",
    "single_qubit_ansatz",
    "solve_step",
]
