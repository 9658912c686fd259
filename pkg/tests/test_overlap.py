import numpy as np
import pytest

from vqsim.ansatz import ParamGate
from vqsim.oracles import to_dense
from vqsim.overlap import (
    Circuit,
    OverlapTask,
    Rotation,
    controlled_op_count,
    exact_overlap,
    sampled_overlap,
)
from vqsim.pauli import PauliString, parse_operator
from vqsim.states import DimensionError, StateVector


def zero(n=1):
    return StateVector.basis(n, 0).amplitudes


def random_task(rng, n=2, template="S1a"):
    gens = ["X0 + Z1", "Y0 Y1", "Z0 + X1", "X0 Z1"]
    ops_l = tuple(Rotation(ParamGate(parse_operator(g, n), 0), float(rng.normal())) for g in gens)
    ops_r = ops_l[:2] + (PauliString("XY"),) + ops_l[2:]
    return OverlapTask(Circuit(zero(n), ops_l), Circuit(zero(n), ops_r), float(rng.uniform(0, 2 * np.pi)), float(rng.uniform(0.5, 2)), template)


def dense_value(task):
    n = task.left.num_qubits

    def unitary(circ):
        u = np.eye(1 << n, dtype=complex)
        for op in circ.ops:
            if isinstance(op, Rotation):
                u = op.gate.matrix(op.angle) @ u
            else:
                u = to_dense(op) @ u
        return u

    amp = (unitary(task.left).conj().T @ unitary(task.right))[0, 0]
    return task.scale * (np.exp(1j * task.phase) * amp).real


def test_identity_overlap_is_one():
    assert exact_overlap(OverlapTask(Circuit(zero()), Circuit(zero()))) == 1


def test_x_overlap_is_zero():
    task = OverlapTask(Circuit(zero()), Circuit(zero(), (PauliString("X"),)), phase=0.7)
    assert exact_overlap(task) == 0


def test_random_task_matches_dense(rng):
    for _ in range(20):
        task = random_task(rng)
        assert abs(exact_overlap(task) - dense_value(task)) <= 1e-12


def test_dimension_mismatch():
    with pytest.raises(DimensionError):
        OverlapTask(Circuit(zero(1)), Circuit(zero(2)))


def test_non_unitary_insertion_rejected():
    with pytest.raises(ValueError):
        Circuit(zero(), (PauliString("X", 2.0),)).state()


def test_deterministic_outcome():
    est, se = sampled_overlap(OverlapTask(Circuit(zero()), Circuit(zero())), 100, 0)
    assert est == 1 and se == 0


def test_zero_shots_rejected():
    with pytest.raises(ValueError):
        sampled_overlap(OverlapTask(Circuit(zero()), Circuit(zero())), 0, 0)


def test_estimates_within_bounds(rng):
    for _ in range(200):
        task = random_task(rng)
        est, _ = sampled_overlap(task, int(rng.integers(1, 50)), rng)
        assert -abs(task.scale) <= est <= abs(task.scale)


def test_x_task_concentrates(rng):
    task = OverlapTask(Circuit(zero()), Circuit(zero(), (PauliString("X"),)))
    errs = {}
    for shots in (10**2, 10**4, 10**6):
        errs[shots] = np.sqrt(np.mean([sampled_overlap(task, shots, rng)[0] ** 2 for _ in range(200)]))
    assert errs[10**2] / errs[10**4] == pytest.approx(10, rel=0.3)
    assert errs[10**4] / errs[10**6] == pytest.approx(10, rel=0.3)


def test_five_sigma_coverage(rng):
    task = random_task(rng)
    exact = exact_overlap(task)
    hits = 0
    for _ in range(200):
        est, se = sampled_overlap(task, 10**4, rng)
        hits += abs(est - exact) <= 5 * se
    assert hits >= 198


def test_unbiased(rng):
    task = random_task(rng)
    samples = np.array([sampled_overlap(task, 1000, rng) for _ in range(1000)])
    pooled = np.sqrt(np.mean(samples[:, 1] ** 2) / len(samples))
    assert abs(samples[:, 0].mean() - exact_overlap(task)) <= 4 * pooled


def test_std_halves_when_shots_quadruple(rng):
    task = random_task(rng)
    s1 = np.std([sampled_overlap(task, 1000, rng)[0] for _ in range(500)])
    s4 = np.std([sampled_overlap(task, 4000, rng)[0] for _ in range(500)])
    assert s1 / s4 == pytest.approx(2, rel=0.2)


def test_same_stream_is_reproducible(rng):
    task = random_task(rng)
    assert sampled_overlap(task, 500, 42) == sampled_overlap(task, 500, 42)


def test_controlled_op_counts(rng):
    assert controlled_op_count(random_task(rng, template="S1a")) == 2
    assert controlled_op_count(random_task(rng, template="S1b")) == 2
    assert controlled_op_count(random_task(rng, template="S2")) == 3
    assert controlled_op_count(random_task(rng, template="S3")) == 3
    assert controlled_op_count(random_task(rng, template="S4")) == 3
    with pytest.raises(ValueError):
        controlled_op_count(random_task(rng, template="mystery"))
