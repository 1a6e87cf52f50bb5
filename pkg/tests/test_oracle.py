import json
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import dde_fold.oracle as oracle
from dde_fold.errors import ConvergenceError, DegreeOverflowError, DomainError, EventClusterWarning
from dde_fold.oracle import HistoryFunction, integrate, poincare_return, residual
from dde_fold.params import FeedbackParams, eval_feedback, fixed_points
from dde_fold.reduced_map import derive_params
from dde_fold.segments import ExpPolySegment


def euler_reference(params, hist, T, dt=1e-5):
    """Plain explicit Euler with linear interpolation of the delayed term."""
    n_h = int(round(1.0 / dt))
    s = np.linspace(-1.0, 0.0, n_h + 1)
    x = list(hist(s))
    for _ in range(int(round(T / dt))):
        x.append(x[-1] + dt * (-x[-1] + eval_feedback(params, x[-1 - n_h])))
    return np.array(x[n_h:])


@pytest.mark.parametrize("which", ["plus", "minus", "zero"])
def test_constant_equilibria(which):
    p = FeedbackParams(6.87, 1e-3)
    fp = fixed_points(p)
    v = {"plus": fp.chi_plus, "minus": fp.chi_minus, "zero": 0.0}[which]
    # chi+- are unstable and the ramp multiplies their rounding error by K/eps,
    # so only the first delay interval is held to a rounding-level bound
    T = 3.0 if which == "zero" else 1.0
    run = integrate(p, HistoryFunction.constant(v), T)
    t = np.linspace(0.0, T, 61)
    tol = 0.0 if which == "zero" else 8 * np.finfo(float).eps * p.K / p.eps
    assert np.max(np.abs(run.evaluate(t) - v)) <= tol


@given(st.floats(-3.0, 3.0), st.sampled_from([1e-2, 1e-3]))
@settings(max_examples=20, deadline=None)
def test_constant_history_matches_euler(c, eps):
    p = FeedbackParams(6.87, eps)
    h = HistoryFunction.constant(c)
    run = integrate(p, h, 2.0)
    ref = euler_reference(p, h, 2.0, dt=2e-4)
    t = np.linspace(0.0, 2.0, len(ref))
    # first order method; near ramps it is slower to converge
    assert np.max(np.abs(run.evaluate(t) - ref)) <= 5e-2


@given(st.floats(-3.0, 3.0))
@settings(max_examples=20, deadline=None)
def test_odd_symmetry_of_flow(c):
    p = FeedbackParams(6.87, 1e-2)
    a = integrate(p, HistoryFunction.constant(c), 2.5)
    b = integrate(p, HistoryFunction.constant(-c), 2.5)
    t = np.linspace(0.0, 2.5, 101)
    assert np.allclose(a.evaluate(t), -b.evaluate(t), atol=1e-12)


def test_round_trip_over_one_period(lower_point, profile):
    p = FeedbackParams(lower_point.K, lower_point.eps)
    h = HistoryFunction.from_profile(profile)
    run = integrate(p, h, profile.period)
    t = np.linspace(0.0, profile.period, 2001)
    assert np.max(np.abs(run.evaluate(t) - profile.evaluate(t))) <= 1e-8
    s = np.linspace(-1.0, 0.0, 201)
    assert np.max(np.abs(run.final_history(s) - h(s))) <= 1e-8
    assert run.T == pytest.approx(profile.period)


def test_events_follow_schedule(lower_point, profile):
    p = FeedbackParams(lower_point.K, lower_point.eps)
    run = integrate(p, HistoryFunction.from_profile(profile), profile.period)
    d = derive_params(lower_point)
    want = [d.tau1, d.tau2, d.tau3, d.omega, d.omega + d.tau1, d.omega + d.tau2, d.omega + d.tau3]
    got = [e for e in run.events if e.time < profile.period - 1e-9]
    assert [e.time for e in got] == pytest.approx(want, abs=1e-10)
    # x(t-1) goes down through 1+eps, then 1, later up through -1-eps and -1
    assert [(e.threshold, e.direction) for e in got[:2]] == [(1 + p.eps, -1), (1.0, -1)]
    log = json.loads(run.events_json())
    assert len(log) == len(run.events) and not any(e["clustered"] for e in log)


def test_poincare_return(lower_point, profile):
    p = FeedbackParams(lower_point.K, lower_point.eps)
    h = HistoryFunction.from_profile(profile)
    t_ret, h_ret = poincare_return(p, h)
    assert t_ret == pytest.approx(profile.period, abs=1e-8)
    s = np.linspace(-1.0, 0.0, 101)
    assert np.max(np.abs(h_ret(s) - h(s))) <= 1e-8


def test_perturbed_history_returns_close(lower_point, profile):
    p = FeedbackParams(lower_point.K, lower_point.eps)
    h = HistoryFunction.from_profile(profile)
    bumped = h.perturbed([(1e-7 * s.c0, tuple(1e-7 * v for v in s.d)) for _, s in h.pieces])
    t_ret, _ = poincare_return(p, bumped)
    assert abs(t_ret - profile.period) < 1e-3


def test_residual_of_certified_profile(lower_point, profile):
    assert residual(FeedbackParams(lower_point.K, lower_point.eps), profile) <= 1e-10


def test_csv_export(lower_point, profile):
    p = FeedbackParams(lower_point.K, lower_point.eps)
    run = integrate(p, HistoryFunction.from_profile(profile), 0.5)
    lines = run.to_csv(p, 10).splitlines()
    assert lines[0] == "t,x,x_delayed,f_delayed" and len(lines) == 12


def test_history_validation():
    seg = ExpPolySegment(0.5, 0.0, (1.0,))
    with pytest.raises(DomainError):
        HistoryFunction(((-1.0, seg),))                              # ends at -0.5
    with pytest.raises(DomainError):
        HistoryFunction(((-1.0, seg), (-0.5, ExpPolySegment(0.5, 0.0, (2.0,)))))    # jump
    with pytest.raises(DomainError):
        integrate(FeedbackParams(6.87, 1e-3), HistoryFunction.constant(0.0), 0.0)


def test_degree_overflow(monkeypatch):
    monkeypatch.setattr(oracle, "MAX_DEGREE", 1)
    p = FeedbackParams(6.87, 0.5)
    # history sitting on the ramp keeps B != 0 and forces degree growth
    with pytest.raises(DegreeOverflowError):
        integrate(p, HistoryFunction.constant(1.2), 3.0)


def test_near_coincident_thresholds_are_merged():
    p = FeedbackParams(6.87, 1e-12)
    h = HistoryFunction(((-1.0, ExpPolySegment(1.0, 20.0, (0.0,))),))
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        run = integrate(p, h, 0.5)
    assert any(issubclass(w.category, EventClusterWarning) for w in caught)
    assert any(e.clustered for e in run.events)


def test_no_return_raises():
    p = FeedbackParams(6.87, 1e-3)
    with pytest.raises(ConvergenceError):
        poincare_return(p, HistoryFunction.constant(0.0), T_max=2.0)


def test_return_time_responds_linearly_to_perturbation(lower_point, profile):
    p = FeedbackParams(lower_point.K, lower_point.eps)
    h = HistoryFunction.from_profile(profile)
    shifts = []
    for d in (1e-6, 1e-5, 1e-4):
        bumped = h.perturbed([(d * s.c0, tuple(d * v for v in s.d)) for _, s in h.pieces])
        shifts.append(poincare_return(p, bumped)[0] - profile.period)
    assert shifts[1] / shifts[0] == pytest.approx(10.0, rel=1e-3)
    assert shifts[2] / shifts[1] == pytest.approx(10.0, rel=1e-3)
