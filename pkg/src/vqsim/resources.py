"""Worst-case measurement budgets for variational simulation.

All counts are ceiling-rounded. A relative slack of ``1e-12`` is removed
before rounding so values that are integers up to float error (``100 /
0.1**2``) round to that integer.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np


def _ceil(x: float) -> int:
    return int(math.ceil(x * (1 - 1e-12)))


def _positive(name: str, value: float) -> None:
    if not value > 0:
        raise ValueError(f"{name} must be positive, got {value}")


@dataclass(frozen=True)
class CostInputs:
    B_norm_max: float = 1.0
    Delta_max: float = 1.0
    Delta3_max: float = 1.0
    T: float = 1.0
    eps_I: float = 0.5
    eps_A: float = 0.5
    eps_D: float = 0.1
    N_P: int = 1
    N_D: int = 1
    N_B: int = 1
    N_BdB: int = 1
    N_A: int = 1
    N_A_prime: int = 1
    N_H: int = 1
    C: float = 1.0
    T_SVD: float | None = None
    L_infinity_norms: tuple[float, ...] = field(default_factory=tuple)

    def __post_init__(self):
        for name in ("N_P", "N_D", "N_B", "N_BdB", "N_A", "N_A_prime", "N_H"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be a positive integer")
        for name in ("B_norm_max", "Delta_max", "Delta3_max"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        for name in ("eps_I", "eps_A", "eps_D"):
            # 1 itself is allowed: eps_A = 1 is the one-step boundary case
            if not 0 < getattr(self, name) <= 1:
                raise ValueError(f"{name} must lie in (0, 1], got {getattr(self, name)}")
        if any(x < 0 for x in self.L_infinity_norms):
            raise ValueError("operator norms must be nonnegative")

    def with_accuracy(self, eps: float) -> CostInputs:
        """Split a total accuracy evenly: ``eps_I = eps_A = eps / 2``."""
        return CostInputs(**{**asdict(self), "eps_I": eps / 2, "eps_A": eps / 2})


def shots_per_term(x: CostInputs) -> int:
    """``N_S = ||B||_max Delta_max^2 T^2 / eps_I^2``."""
    _positive("eps_I", x.eps_I)
    return _ceil(x.B_norm_max * x.Delta_max**2 * x.T**2 / x.eps_I**2)


def steps_required(x: CostInputs) -> tuple[int, float]:
    """``(N_A, dt)`` with ``N_A = Delta3 T^3 / eps_A^2`` and ``dt = eps_A^2 / (Delta3 T^2)``."""
    _positive("eps_A", x.eps_A)
    _positive("Delta3_max", x.Delta3_max)
    return _ceil(x.Delta3_max * x.T**3 / x.eps_A**2), x.eps_A**2 / (x.Delta3_max * x.T**2)


def circuits_per_step(x: CostInputs) -> int:
    """Distinct circuits evaluated per time step."""
    return int(
        x.N_BdB * x.N_P**2 * x.N_D**2
        + 2 * x.N_B * x.N_D * x.N_P
        + x.N_BdB
        + x.N_B * x.N_A * x.N_A_prime * (x.N_P * x.N_D + 1)
    )


def total_measurements(x: CostInputs, svd: bool = False) -> int:
    """``N_S * N_A * N_I`` or, with ``svd=True``, the SVD-route estimate.

    The SVD estimate is
    ``||B|| Delta^2 Delta3 T_SVD^5 / ((eps_A - eps_D)^2 eps_I^2) * (N_P^2 N_D^2 + N_P N_H N_D)``.
    """
    if not svd:
        return shots_per_term(x) * steps_required(x)[0] * circuits_per_step(x)
    _positive("eps_I", x.eps_I)
    if not x.eps_A > x.eps_D:
        raise ValueError(f"SVD budget needs eps_A > eps_D (got {x.eps_A} <= {x.eps_D})")
    t = x.T if x.T_SVD is None else x.T_SVD
    pre = x.B_norm_max * x.Delta_max**2 * x.Delta3_max * t**5 / ((x.eps_A - x.eps_D) ** 2 * x.eps_I**2)
    return _ceil(pre * (x.N_P**2 * x.N_D**2 + x.N_P * x.N_H * x.N_D))


def plain_total_closed_form(x: CostInputs, eps: float) -> float:
    """``16 ||B|| Delta^2 Delta3 T^5 / eps^4 * N_I``: the unrounded total at ``eps_I = eps_A = eps/2``."""
    return 16 * x.B_norm_max * x.Delta_max**2 * x.Delta3_max * x.T**5 / eps**4 * circuits_per_step(x)


def jump_budget(x: CostInputs, orthogonal_local: bool = False) -> tuple[float, float | None]:
    """Mean jump-count bounds ``T sum_k ||L_k^dag L_k||`` and, for local orthogonal channels, ``T max_k``."""
    norms = list(x.L_infinity_norms)
    bound = x.T * float(sum(norms))
    local = x.T * float(max(norms, default=0.0)) if orthogonal_local else None
    return bound, local


def alpha_for_accuracy(C: float, eps_D: float) -> float:
    """``alpha = ln(2 / (C eps_D)) / 2``."""
    _positive("C", C)
    _positive("eps_D", eps_D)
    return 0.5 * math.log(2.0 / (C * eps_D))


def cost_table(x: CostInputs) -> dict:
    """Every estimate for one input set, as a flat dict."""
    n_a, dt = steps_required(x)
    out = {
        "N_S": shots_per_term(x),
        "N_A": n_a,
        "dt": dt,
        "N_I": circuits_per_step(x),
        "N_tot": total_measurements(x),
    }
    if x.eps_A > x.eps_D:
        out["N_tot_SVD"] = total_measurements(x, svd=True)
    if x.L_infinity_norms:
        out["N_jump_bound"] = jump_budget(x)[0]
    out["alpha"] = alpha_for_accuracy(x.C, x.eps_D)
    return out


def empirical_inverse_norm(problem, ansatz, theta0, regularization=None) -> dict:
    """Record ``max ||M~^-1||`` and ``max ||V~||`` along an Exact-mode run.

    These feed ``Delta_max`` when no a-priori bound is known.
    """
    from .engine import Tikhonov, assemble_from_tangent, solve_step

    regularization = regularization or Tikhonov()
    theta = np.array(theta0, dtype=float)
    v_init = ansatz.prepare(theta).amplitudes
    n = problem.num_steps
    h = problem.duration / n
    inv_norm = v_norm = 0.0
    for step in range(n):
        v, D = ansatz.tangent(theta)
        m = assemble_from_tangent(problem, v, D, step * h, v_init)
        w = np.linalg.eigvalsh(m.M)
        floor = (regularization.relative * np.trace(m.M) / len(w)) if isinstance(regularization, Tikhonov) else 0.0
        inv_norm = max(inv_norm, 1.0 / max(w.min() + floor, 1e-300))
        v_norm = max(v_norm, float(np.linalg.norm(m.V)))
        theta = theta + h * solve_step(m, regularization)
    return {"max_inverse_norm": inv_norm, "max_V_norm": v_norm}
