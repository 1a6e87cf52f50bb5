"""Numerical checks of the eps -> 0+ limits and expansions of the reduced map.

Each check evaluates a quantity on a descending eps grid and compares it
with its limit. A check passes when |observed - limit| <= C * eps**order at
every grid point, with C a frozen budget, and when the fitted log-log slope
reaches order - 0.1. The battery fails closed: every name in ``REQUIRED``
must produce a result, and a missing one counts as a failure.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .bifurcation import L2_hat_on_phi, locate_fold, solve_phi
from .derivatives import jet_from_chain
from .errors import DomainError
from .orbit import _segments_from_chain
from .reduced_map import L2_hat, _chain, solve_K0, theta_star

__all__ = ["LimitCheck", "run_all", "REQUIRED", "DEFAULT_EPS_GRID", "BUDGETS", "report_table", "limit_values"]

DEFAULT_EPS_GRID = (1e-2, 3e-3, 1e-3, 3e-4, 1e-4)
K_FIXED = 6.87
_T_SAMPLES = 1000
_MIN_EPS = 1e-5

# 5x the constant |observed - limit| / eps**order measured at eps = 1e-2
BUDGETS = {
    "theta6_minus_1": 5 * 0.2424,
    "L4": 5 * 0.0308,
    "first_F_term": 5 * 0.02565,
    "theta3_vs_theta_star": 5 * 1.056,
    "L2_hat_over_eps": 5 * 0.3737,
    "F_at_zero": 5 * 2.413,
    "dFdK_at_K_eps": 5 * 0.05103,
    "dFdL2_at_zero": 5 * 0.984,
    "dFdL2_at_L2_hat": 5 * 0.2578,
    "eps_d2F_at_fold": 5 * 8.429,
    "L1_at_fold": 5 * 0.316,
    "power_expansion": 5 * 1.02,
    "y2_uniform": 5 * 2.211,
    "y3_uniform": 5 * 1.594,
    "y4_uniform": 5 * 1.135,
}

REQUIRED = tuple(BUDGETS)


@dataclass(frozen=True)
class LimitCheck:
    name: str
    eps_grid: tuple[float, ...]
    observed: tuple[float, ...]
    limit: float
    fitted_rate_constant: float
    passed: bool
    order: int = 1
    slope: float = math.nan
    budget: float = math.nan
    note: str = ""

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "eps_grid": list(self.eps_grid),
            "observed": list(self.observed),
            "limit": self.limit,
            "fitted_rate_constant": self.fitted_rate_constant,
            "slope": self.slope,
            "budget": self.budget,
            "order": self.order,
            "pass": self.passed,
            "note": self.note,
        }


def limit_values() -> dict[str, float]:
    """The closed-form eps -> 0+ limits, with K0 from ``solve_K0``."""
    K0 = solve_K0()
    r = (K0 + 1.0) / (K0 - 1.0)
    ts = theta_star(K_FIXED)
    return {
        "theta6_minus_1": 0.0,
        "L4": 0.0,
        "first_F_term": 0.0,
        "theta3_vs_theta_star": ts,
        "L2_hat_over_eps": (K_FIXED - 4.0) / (2.0 * (K_FIXED - 1.0)),
        "F_at_zero": ts - (K_FIXED + 1.0) / (K_FIXED - 1.0),
        "dFdK_at_K_eps": 1.0 - math.exp(-0.5) * (1.5 * math.sqrt(r) - 0.5 * r ** 1.5) + 2.0 / (K0 - 1.0) ** 2,
        "dFdL2_at_zero": 1.0 + (2 * K0 ** 2 + 2 * K0 + 1.0) / (2.0 * (K0 ** 2 - 1.0)),
        "dFdL2_at_L2_hat": 1.0 + (-K0 ** 3 + 6 * K0 ** 2 + 2 * K0 + 1.0) / (2 * K0 ** 2 - 2.0),
        "eps_d2F_at_fold": -K0 ** 2 / (K0 + 1.0),
        "L1_at_fold": 0.5 - 1.5 * math.log(r),
        "power_expansion": 0.0,
        "y2_uniform": 0.0,
        "y3_uniform": 0.0,
        "y4_uniform": 0.0,
    }


def _sup_distance(eps: float, index: int) -> float:
    L2 = 0.5 * L2_hat(K_FIXED, eps)
    seg = _segments_from_chain(_chain(L2, K_FIXED, eps))[index]
    t = np.linspace(0.0, seg.length, _T_SAMPLES)
    return float(np.max(np.abs(seg.value(t) - theta_star(K_FIXED))))


def _observers() -> dict[str, Callable[[float], float]]:
    def at0(attr):
        return lambda e: float(getattr(_chain(0.0, K_FIXED, e), attr))

    def jet_at(L2, K, e):
        return jet_from_chain(_chain(L2, K, e))

    def at_L2_hat(e):
        L, K = L2_hat_on_phi(e)
        return jet_at(L, K, e).dF_dL2

    def at_fold(e):
        b = locate_fold(e, certify=False)
        return e * b.d2FdL2sq

    def L1_fold(e):
        b = locate_fold(e, certify=False)
        return float(_chain(b.L2_star, b.K_star, e).L1)

    def power(e):
        c = _chain(0.0, K_FIXED, e)
        return float(c.Kp ** 1.5 - (K_FIXED + 1.0) ** 1.5)

    return {
        "theta6_minus_1": at0("theta6m1"),
        "L4": at0("L4"),
        "first_F_term": at0("T1"),
        "theta3_vs_theta_star": at0("theta3"),
        "L2_hat_over_eps": lambda e: L2_hat(K_FIXED, e) / e,
        "F_at_zero": at0("F"),
        "dFdK_at_K_eps": lambda e: jet_at(0.0, solve_phi(0.0, e), e).dF_dK,
        "dFdL2_at_zero": lambda e: jet_at(0.0, solve_phi(0.0, e), e).dF_dL2,
        "dFdL2_at_L2_hat": at_L2_hat,
        "eps_d2F_at_fold": at_fold,
        "L1_at_fold": L1_fold,
        "power_expansion": power,
        "y2_uniform": lambda e: _sup_distance(e, 1),
        "y3_uniform": lambda e: _sup_distance(e, 2),
        "y4_uniform": lambda e: _sup_distance(e, 3),
    }


def _fit_slope(eps: np.ndarray, err: np.ndarray) -> float:
    """Least-squares slope of log|err| against log eps.

    When the last local slope breaks away from the others by more than 0.5
    (roundoff taking over at the smallest eps) that point is dropped.
    """
    mask = err > 0.0
    x, y = np.log(eps[mask]), np.log(err[mask])
    if x.size < 2:
        return math.inf
    if x.size >= 4:
        local = np.diff(y) / np.diff(x)
        if abs(local[-1] - np.median(local[:-1])) > 0.5:
            x, y = x[:-1], y[:-1]
    return float(np.polyfit(x, y, 1)[0])


def _evaluate(name: str, fn, eps_grid: Sequence[float], limit: float, budget: float, order: int = 1) -> LimitCheck:
    eps = np.asarray(eps_grid, dtype=float)
    obs = np.array([fn(float(e)) for e in eps])
    err = np.abs(obs - limit)
    scaled = err / eps ** order
    C = float(np.max(scaled))
    slope = _fit_slope(eps, err)
    ok = bool(np.all(err <= budget * eps ** order) and slope >= order - 0.1)
    note = ""
    if name == "eps_d2F_at_fold" and float(eps[-1]) <= 1e-4:
        rel = float(err[-1] / abs(limit))
        ok = ok and rel <= 0.05
        note = f"relative deviation at eps={eps[-1]:g}: {rel:.3g}"
    if name.endswith("_uniform"):
        note = f"sup over {_T_SAMPLES} equally spaced t"
    return LimitCheck(name, tuple(map(float, eps)), tuple(map(float, obs)), float(limit), C, ok,
                      order, slope, budget, note)


def run_all(eps_grid: Sequence[float] = DEFAULT_EPS_GRID, *, allow_small_eps: bool = False) -> list[LimitCheck]:
    """Run every registered limit check on ``eps_grid`` (descending, within (0, 0.1])."""
    eps_grid = tuple(float(e) for e in eps_grid)
    if len(eps_grid) < 2 or any(a <= b for a, b in zip(eps_grid[:-1], eps_grid[1:])):
        raise DomainError("eps_grid must be strictly descending with at least two entries")
    if not (0.0 < eps_grid[-1] and eps_grid[0] <= 0.1):
        raise DomainError("eps_grid must lie in (0, 0.1]")
    if eps_grid[-1] < _MIN_EPS and not allow_small_eps:
        raise DomainError("eps below 1e-5 exhausts double precision; pass allow_small_eps to force")
    limits = limit_values()
    observers = _observers()
    out = []
    for name in REQUIRED:
        fn = observers.get(name)
        if fn is None or name not in limits:
            out.append(LimitCheck(name, eps_grid, (), math.nan, math.nan, False, note="not implemented"))
            continue
        out.append(_evaluate(name, fn, eps_grid, limits[name], BUDGETS[name]))
    return out


def report_table(checks: Sequence[LimitCheck]) -> str:
    rows = [f"{'check':<24} {'limit':>14} {'C_fit':>10} {'budget':>10} {'slope':>6}  result"]
    for c in checks:
        rows.append(
            f"{c.name:<24} {c.limit:>14.8g} {c.fitted_rate_constant:>10.4g} {c.budget:>10.4g} "
            f"{c.slope:>6.2f}  {'PASS' if c.passed else 'FAIL'}"
        )
    return "\n".join(rows)
