import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from dde_fold.errors import DomainError
from dde_fold.params import FeedbackParams, eval_feedback, fixed_points

K_st = st.floats(1.5, 50.0)
eps_st = st.floats(1e-8, 0.99)
x_st = st.floats(-10.0, 10.0, allow_nan=False)


def test_piecewise_values():
    p = FeedbackParams(6.87, 1e-3)
    assert eval_feedback(p, 0.0) == 0.0
    assert eval_feedback(p, 1.0) == 0.0
    assert eval_feedback(p, 1.0005) == pytest.approx(6.87 * 0.5, rel=1e-9)
    assert eval_feedback(p, 1.001) == 6.87
    assert eval_feedback(p, 3.0) == 6.87
    assert eval_feedback(p, -3.0) == -6.87


def test_array_matches_scalar():
    p = FeedbackParams(6.87, 1e-2)
    x = np.linspace(-1.1, 1.1, 2001)
    assert np.array_equal(eval_feedback(p, x), np.array([eval_feedback(p, v) for v in x]))


@pytest.mark.parametrize("K,eps", [(0.0, 0.1), (-1.0, 0.1), (5.0, 0.0), (5.0, 1.0), (math.nan, 0.1)])
def test_rejects_bad_params(K, eps):
    with pytest.raises(DomainError):
        FeedbackParams(K, eps)


def test_bifurcation_range():
    FeedbackParams(6.87, 1e-3).require_bifurcation_range()
    with pytest.raises(DomainError):
        FeedbackParams(7.5, 1e-3).require_bifurcation_range()


def test_fixed_points_by_bisection():
    # independent oracle: bisect f_K(x) - x on the ramp
    p = FeedbackParams(6.87, 1e-3)
    lo, hi = 1.0 + 1e-12, 1.0 + p.eps
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if eval_feedback(p, mid) - mid < 0.0:
            lo = mid
        else:
            hi = mid
    fp = fixed_points(p)
    assert fp.chi_plus == pytest.approx(lo, rel=1e-15)
    assert fp.chi_minus == -fp.chi_plus


@given(K_st, eps_st, x_st)
def test_odd(K, eps, x):
    p = FeedbackParams(K, eps)
    assert eval_feedback(p, -x) == -eval_feedback(p, x)


@given(K_st, eps_st, x_st, x_st)
def test_nondecreasing_and_bounded(K, eps, x, y):
    p = FeedbackParams(K, eps)
    lo, hi = sorted((x, y))
    assert eval_feedback(p, lo) <= eval_feedback(p, hi)
    assert abs(eval_feedback(p, x)) <= K


@given(K_st, st.floats(1e-4, 0.99), st.sampled_from([1.0, -1.0]), st.booleans())
def test_continuous_at_breakpoints(K, eps, sign, outer):
    p = FeedbackParams(K, eps)
    b = sign * (1.0 + eps if outer else 1.0)
    d = 1e-12
    jump = abs(eval_feedback(p, b + d) - eval_feedback(p, b - d))
    assert jump <= 2.0 * d * K / eps * 1.01 + 1e-12
