import numpy as np
import pytest

from vqsim.open_system import LindbladModel, build_ising_benchmark, sigma_plus
from vqsim.oracles import (
    DenseOperator,
    exact_lindblad,
    exact_schrodinger,
    exact_trajectories,
    exact_trajectory,
    ground_energy,
    propagate_expm,
    to_dense,
)
from vqsim.pauli import OperatorSum, parse_operator
from vqsim.states import StateVector

Z = np.diag([1.0, -1.0]).astype(complex)


def decay_model(gamma=1.0):
    return LindbladModel(OperatorSum.zero(1), [sigma_plus(1, 0, gamma)])


def z_expectations(rhos):
    return np.einsum("tij,ji->t", rhos, Z).real


def test_dense_operator_matches_kron():
    op = parse_operator("0.3*X0 Z1 + 0.2j*Y1", 2)
    X, Y = np.array([[0, 1], [1, 0]]), np.array([[0, -1j], [1j, 0]])
    expected = 0.3 * np.kron(Z, X) + 0.2j * np.kron(Y, np.eye(2))
    dense = DenseOperator.from_operator(op)
    assert np.max(np.abs(dense.entries - expected)) <= 1e-14
    np.testing.assert_allclose(dense @ [1, 0, 0, 0], expected[:, 0])


# Schrödinger -----------------------------------------------------------------


def test_schrodinger_eigenstate():
    _, states = exact_schrodinger(parse_operator("Z0", 1), [1, 0], 5.0, 1e-2)
    np.testing.assert_allclose(np.abs(states[:, 0]) ** 2, 1, atol=1e-12)


def test_schrodinger_rabi():
    t, states = exact_schrodinger(parse_operator("X0", 1), [1, 0], 5.0, 1e-3)
    z = np.abs(states[:, 0]) ** 2 - np.abs(states[:, 1]) ** 2
    np.testing.assert_allclose(z, np.cos(2 * t), atol=1e-9)


def test_schrodinger_ising_matches_expm():
    model, _, _ = build_ising_benchmark(dissipative=False)
    psi0 = StateVector.basis(6, 0).amplitudes
    _, states = exact_schrodinger(model.H, psi0, 1.0, 1e-3)
    assert np.max(np.abs(states[-1] - propagate_expm(model.H, psi0, 1.0))) <= 1e-6


def test_schrodinger_norm_drift(rng):
    H = parse_operator("X0 + 0.5*Z0 Z1 - 0.3*Y1", 2)
    _, states = exact_schrodinger(H, StateVector.random(2, rng).amplitudes, 10.0, 1e-3)
    assert np.max(np.abs(np.linalg.norm(states, axis=1) - 1)) <= 1e-8


def test_schrodinger_too_many_qubits():
    with pytest.raises(OverflowError):
        exact_schrodinger(OperatorSum.zero(11), np.zeros(2**11), 1.0, 0.1)


def test_ground_energy():
    assert ground_energy(parse_operator("Z0 Z1 + 0.5*X0", 2)) == pytest.approx(-np.sqrt(1.25))


# Lindblad --------------------------------------------------------------------


def test_lindblad_decay_closed_form():
    t, rhos = exact_lindblad(decay_model(0.8), [1, 0], 5.0, 1e-3)
    np.testing.assert_allclose(z_expectations(rhos), 2 * np.exp(-0.8 * t) - 1, atol=1e-10)


def test_lindblad_trace_hermiticity_positivity(rng):
    H = parse_operator("0.7*X0 + 0.4*Z0 Z1 + 0.2*Y1", 2)
    model = LindbladModel(H, [sigma_plus(2, 0), parse_operator("0.5*Z1", 2), parse_operator("0.3*X0 X1 - 0.2j*Y0", 2)])
    _, rhos = exact_lindblad(model, StateVector.random(2, rng).amplitudes, 5.0, 1e-3)
    assert np.max(np.abs(np.trace(rhos, axis1=1, axis2=2) - 1)) <= 1e-8
    assert np.max(np.abs(rhos - rhos.conj().transpose(0, 2, 1))) <= 1e-10
    assert min(np.linalg.eigvalsh(r).min() for r in rhos) >= -1e-8


def test_lindblad_reduces_to_schrodinger(rng):
    H = parse_operator("X0 + 0.5*Z0 Z1 - 0.3*Y1", 2)
    psi0 = StateVector.random(2, rng).amplitudes
    _, rhos = exact_lindblad(LindbladModel(H, []), psi0, 2.0, 1e-3)
    _, states = exact_schrodinger(H, psi0, 2.0, 1e-3)
    pure = np.einsum("ti,tj->tij", states, states.conj())
    assert np.max(np.abs(rhos - pure)) <= 1e-8


def test_lindblad_accepts_density_matrix():
    _, a = exact_lindblad(decay_model(), [1, 0], 1.0, 1e-2)
    _, b = exact_lindblad(decay_model(), np.diag([1, 0]), 1.0, 1e-2)
    np.testing.assert_array_equal(a, b)


def test_lindblad_rk4_order():
    T = 2.0
    exact = 2 * np.exp(-T) - 1
    err = [abs(z_expectations(exact_lindblad(decay_model(), [1, 0], T, dt)[1])[-1] - exact) for dt in (0.2, 0.1)]
    assert err[0] / err[1] == pytest.approx(16, rel=0.3)


def test_lindblad_too_many_qubits():
    model = LindbladModel(OperatorSum.zero(7), [])
    with pytest.raises(OverflowError):
        exact_lindblad(model, np.eye(1, 128)[0], 1.0, 0.1)


# trajectories ----------------------------------------------------------------


def test_zero_lindblad_trajectory_is_schrodinger(rng):
    H = parse_operator("X0 + 0.5*Z0 Z1", 2)
    psi0 = StateVector.random(2, rng).amplitudes
    dt = 1e-4
    tr = exact_trajectory(LindbladModel(H, []), psi0, 1.0, dt, 0)
    _, states = exact_schrodinger(H, psi0, 1.0, dt)
    assert tr.jumps == []
    # first-order drift: O(dt) agreement with the RK4 path
    assert abs(abs(np.vdot(states[-1], tr.final_states)) - 1) <= 1e-6


def test_trajectory_seed_reproducible():
    a = exact_trajectory(decay_model(), [1, 0], 3.0, 0.01, (1, 2))
    b = exact_trajectory(decay_model(), [1, 0], 3.0, 0.01, (1, 2))
    assert a.jumps == b.jumps
    assert exact_trajectories(decay_model(), [1, 0], 3.0, 0.01, [(1, 2)]).jumps[0] == a.jumps


def test_trajectory_channels_are_one_based():
    model = LindbladModel(OperatorSum.zero(2), [sigma_plus(2, 0), sigma_plus(2, 1)])
    res = exact_trajectories(model, [1, 0, 0, 0], 6.0, 0.01, range(50))
    channels = {k for j in res.jumps for _, k in j}
    assert channels == {1, 2}


def test_trajectory_average_converges_as_inverse_sqrt():
    seeds = [(21, i) for i in range(10_000)]
    res = exact_trajectories(decay_model(), [1, 0], 3.0, 0.01, seeds, {"Z": parse_operator("Z0", 1)})
    _, rhos = exact_lindblad(decay_model(), [1, 0], 3.0, 0.01)
    ref = z_expectations(rhos)
    errs = {}
    for n in (100, 1000, 10_000):
        # RMS over disjoint batches at the final time
        batches = res.values["Z"][:, -1].reshape(-1, n).mean(axis=1) if n < 10_000 else res.values["Z"][:, -1].mean(keepdims=True)
        errs[n] = np.sqrt(np.mean((batches - ref[-1]) ** 2))
    assert errs[100] / errs[1000] == pytest.approx(np.sqrt(10), rel=0.3)
    # a single 10^4 batch gives one sample of the error; check it against its expected size
    sigma = res.values["Z"][:, -1].std() / 100
    assert errs[10_000] <= 4 * sigma


def test_trajectory_average_density_matrix(rng):
    H = parse_operator("0.7*X0 + 0.4*Z0 Z1", 2)
    model = LindbladModel(H, [sigma_plus(2, 0), parse_operator("0.5*Z1", 2)])
    res = exact_trajectories(model, StateVector.random(2, rng).amplitudes, 2.0, 0.005, range(2000))
    rhos = np.einsum("si,sj->sij", res.final_states, res.final_states.conj())
    mean = rhos.mean(axis=0)
    se = rhos.std(axis=0) / np.sqrt(len(rhos))
    assert np.max(np.abs(mean - mean.conj().T)) <= 1e-12
    assert abs(np.trace(mean) - 1) <= max(3 * np.abs(np.diag(se)).sum(), 1e-12)
    assert np.linalg.eigvalsh(mean).min() >= -3 * se.max()


def test_benchmark_trajectories_match_lindblad():
    model, _, C = build_ising_benchmark()
    psi0 = StateVector.basis(6, 0).amplitudes
    res = exact_trajectories(model, psi0, 6.0, 0.005, [(0, i) for i in range(2000)], {"C": C})
    _, rhos = exact_lindblad(model, psi0, 6.0, 0.005)
    ref = np.einsum("tij,ji->t", rhos, to_dense(C)).real
    mean = res.values["C"].mean(axis=0)
    se = res.values["C"].std(axis=0, ddof=1) / np.sqrt(2000)
    assert np.all(np.abs(mean - ref) <= 4 * se + 1e-12)
