import math

import pytest

import dde_fold.asymptotics as asy
from dde_fold.errors import DomainError
from dde_fold.reduced_map import solve_K0


@pytest.fixture(scope="module")
def checks():
    return asy.run_all()


def test_every_required_check_runs_and_passes(checks):
    assert [c.name for c in checks] == list(asy.REQUIRED)
    failed = [(c.name, c.note) for c in checks if not c.passed]
    assert not failed


def test_fitted_orders(checks):
    for c in checks:
        assert c.slope >= c.order - 0.1, c.name
        assert c.fitted_rate_constant <= c.budget, c.name


def test_second_derivative_within_five_percent(checks):
    c = next(c for c in checks if c.name == "eps_d2F_at_fold")
    K0 = solve_K0()
    assert c.limit == pytest.approx(-K0 ** 2 / (K0 + 1))
    assert abs(c.observed[-1] - c.limit) <= 0.05 * abs(c.limit)


def test_slope_limits_straddle_one():
    lim = asy.limit_values()
    assert lim["dFdL2_at_zero"] > 1.0 > lim["dFdL2_at_L2_hat"]
    assert lim["dFdK_at_K_eps"] > 0.0


def test_fails_closed_on_missing_observer(monkeypatch):
    real = asy._observers
    monkeypatch.setattr(asy, "_observers", lambda: {k: v for k, v in real().items() if k != "L4"})
    out = {c.name: c for c in asy.run_all((1e-2, 1e-3))}
    assert not out["L4"].passed and out["L4"].note == "not implemented"


def test_budget_violation_fails(monkeypatch):
    monkeypatch.setitem(asy.BUDGETS, "theta6_minus_1", 1e-6)
    out = {c.name: c for c in asy.run_all((1e-2, 1e-3))}
    assert not out["theta6_minus_1"].passed


@pytest.mark.parametrize("grid", [(1e-3,), (1e-3, 1e-2), (0.5, 1e-2), (1e-4, 1e-6)])
def test_grid_validation(grid):
    with pytest.raises(DomainError):
        asy.run_all(grid)


def test_report_table(checks):
    table = asy.report_table(checks)
    assert table.count("PASS") == len(checks)
    d = checks[0].to_dict()
    assert d["pass"] is True and math.isfinite(d["slope"])
