import math

import numpy as np
import pytest

from vqsim.ansatz import single_qubit_ansatz
from vqsim.engine import real_time_problem
from vqsim.pauli import parse_operator
from vqsim.resources import (
    CostInputs,
    alpha_for_accuracy,
    circuits_per_step,
    cost_table,
    empirical_inverse_norm,
    jump_budget,
    plain_total_closed_form,
    shots_per_term,
    steps_required,
    total_measurements,
)


def test_shots_example():
    x = CostInputs(Delta_max=10, eps_I=0.1)
    assert shots_per_term(x) == 10_000


def test_shots_scaling():
    x = CostInputs(Delta_max=10, eps_I=0.1)
    assert shots_per_term(CostInputs(Delta_max=10, eps_I=0.05)) == 4 * shots_per_term(x)
    assert shots_per_term(CostInputs(Delta_max=10, eps_I=0.1, T=2)) == 4 * shots_per_term(x)


def test_steps_examples():
    n, dt = steps_required(CostInputs(eps_A=0.1))
    assert n == 100 and dt == pytest.approx(0.01)
    assert steps_required(CostInputs(eps_A=0.1, T=2))[0] == 800
    assert steps_required(CostInputs(eps_A=1.0))[0] == 1


def test_circuit_counts():
    assert circuits_per_step(CostInputs()) == 6
    assert circuits_per_step(CostInputs(N_P=54)) == 3080
    ratio = circuits_per_step(CostInputs(N_P=108)) / circuits_per_step(CostInputs(N_P=54))
    assert ratio == pytest.approx(4, rel=0.05)


def test_factorization_identity():
    x = CostInputs()
    assert total_measurements(x) == shots_per_term(x) * steps_required(x)[0] * circuits_per_step(x)
    y = CostInputs(B_norm_max=2.5, Delta_max=3, Delta3_max=0.7, T=2, eps_I=0.01, eps_A=0.02, N_P=54)
    assert total_measurements(y) == shots_per_term(y) * steps_required(y)[0] * circuits_per_step(y)


def test_eps_fourth_power_scaling():
    # inputs chosen so no ceiling is active and the counts are exact
    base = CostInputs(B_norm_max=2, Delta_max=3, Delta3_max=1, T=2, N_P=4)
    a, b = base.with_accuracy(0.2), base.with_accuracy(0.1)
    assert total_measurements(b) == 16 * total_measurements(a)
    assert total_measurements(a) == pytest.approx(plain_total_closed_form(base, 0.2), rel=1e-12)
    odd = CostInputs(B_norm_max=1.3, Delta_max=2, Delta3_max=1.1, T=1.5, N_P=4)
    assert plain_total_closed_form(odd, 0.1) / plain_total_closed_form(odd, 0.2) == pytest.approx(16, rel=1e-14)


def test_svd_budget_and_pole_guard():
    x = CostInputs(eps_A=0.3, eps_D=0.1, eps_I=0.2, N_P=3, N_H=2)
    expected = math.ceil(1 / (0.2**2 * 0.2**2) * (9 + 6) - 1e-9)
    assert total_measurements(x, svd=True) == expected
    near = [total_measurements(CostInputs(eps_A=0.1 + d, eps_D=0.1), svd=True) for d in (1e-2, 1e-3, 1e-4)]
    assert near[0] < near[1] < near[2]
    with pytest.raises(ValueError, match="eps_A > eps_D"):
        total_measurements(CostInputs(eps_A=0.1, eps_D=0.1), svd=True)


def test_jump_budget():
    bound, local = jump_budget(CostInputs(T=6, L_infinity_norms=(1.0,) * 6), orthogonal_local=True)
    assert bound == 36 and local == 6
    assert jump_budget(CostInputs(T=6))[0] == 0


def test_alpha_examples():
    assert alpha_for_accuracy(1, 2) == 0
    assert alpha_for_accuracy(0.5, 1e-3) == pytest.approx(0.5 * math.log(4000))
    assert alpha_for_accuracy(0.5, 1e-3) == pytest.approx(4.1470, abs=1e-4)


def test_alpha_inverse_identity(rng):
    for C, eps in zip(rng.uniform(0.01, 1, 50), 10 ** rng.uniform(-8, 0, 50)):
        alpha = alpha_for_accuracy(C, eps)
        assert 2 * math.exp(-2 * alpha) / C == pytest.approx(eps, rel=1e-12)


def test_alpha_rejects_nonpositive():
    with pytest.raises(ValueError):
        alpha_for_accuracy(0, 0.1)
    with pytest.raises(ValueError):
        alpha_for_accuracy(1, -0.1)


def test_monotonicity():
    base = dict(B_norm_max=1.0, Delta_max=2.0, Delta3_max=1.0, T=1.0, eps_I=0.1, eps_A=0.2, eps_D=0.05, N_P=3)

    def outputs(**kw):
        x = CostInputs(**{**base, **kw})
        return np.array([shots_per_term(x), steps_required(x)[0], total_measurements(x), total_measurements(x, svd=True)])

    ref = outputs()
    for key in ("T", "Delta_max", "Delta3_max", "B_norm_max"):
        assert np.all(outputs(**{key: base[key] * 1.5}) >= ref)
    for key in ("eps_I", "eps_A"):
        assert np.all(outputs(**{key: base[key] * 1.5}) <= ref)


def test_invalid_inputs():
    with pytest.raises(ValueError):
        CostInputs(N_P=0)
    with pytest.raises(ValueError):
        CostInputs(Delta_max=-1)
    with pytest.raises(ValueError):
        CostInputs(eps_I=0)
    with pytest.raises(ValueError):
        CostInputs(eps_A=1.5)
    with pytest.raises(ValueError):
        CostInputs(L_infinity_norms=(-1.0,))


def test_cost_table_keys():
    table = cost_table(CostInputs(L_infinity_norms=(1.0, 2.0)))
    assert {"N_S", "N_A", "dt", "N_I", "N_tot", "N_tot_SVD", "N_jump_bound", "alpha"} <= set(table)
    assert table["N_tot"] == table["N_S"] * table["N_A"] * table["N_I"]


def test_empirical_inverse_norm():
    a = single_qubit_ansatz()
    out = empirical_inverse_norm(real_time_problem(parse_operator("X0", 1), 0.5, 0.01), a, [0.3, 0.2, 0.1])
    assert out["max_inverse_norm"] > 0 and np.isfinite(out["max_inverse_norm"])
    assert out["max_V_norm"] > 0
