import math
from fractions import Fraction

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import mp_chain, mp_F, mp_L2_hat
from dde_fold.errors import DomainError
from dde_fold.reduced_map import (
    F_array,
    MapDomainPoint,
    RESIDUAL_NAMES,
    derive_params,
    eval_F,
    ke_residual,
    residuals_B,
    solve_K0,
    theta_star,
    w,
    L2_hat,
    _chain,
)
from dde_fold.bifurcation import branch_point

K_st = st.floats(6.5 + 1e-9, 7.0 - 1e-9)
eps_st = st.sampled_from([1e-2, 3e-3, 1e-3, 1e-4, 1e-5])
u_st = st.floats(-0.999, 0.999)


@given(u_st, K_st, eps_st)
@settings(max_examples=60, deadline=None)
def test_F_against_high_precision(u, K, eps):
    L2 = u * eps
    ref = mp_F(L2, K, eps)
    assert eval_F(MapDomainPoint(L2, K, eps)) == pytest.approx(float(ref), abs=1e-13)


def test_first_term_keeps_ten_digits_at_eps_1e6():
    eps = 1e-6
    with mp.workdps(40):       # about 128-bit
        for K in (6.6, 6.87, 6.95):
            for u in (-0.9, 0.0, 0.4):
                ref = mp_chain(u * eps, K, eps)["T1"]
                got = _chain(u * eps, K, eps).T1
                assert abs(got - ref) <= 1e-10 * abs(ref)


def test_naive_first_term_loses_digits():
    # sanity check that the safe kernels matter: the literal formula in doubles is off
    eps, K = 1e-6, 6.87
    c = _chain(0.0, K, eps)
    naive = (K / eps) * (K + 1.0) * (1.0 - (1.0 - c.L4) * math.exp(c.L4))
    assert abs(naive - c.T1) > 1e-6 * abs(c.T1)


def test_F_array_matches_scalar():
    L = np.linspace(-9e-4, 9e-4, 7)
    vals = F_array(L, 6.87, 1e-3)
    assert np.allclose(vals, [eval_F(MapDomainPoint(v, 6.87, 1e-3)) for v in L], rtol=0, atol=1e-15)


@pytest.mark.parametrize("L2,K,eps", [(1.01e-3, 6.87, 1e-3), (-1.01e-3, 6.87, 1e-3), (0.0, 6.4, 1e-3), (0.0, 7.1, 1e-3),
                                      (0.0, 6.87, 0.0), (0.0, 6.87, 1.0), (math.nan, 6.87, 1e-3)])
def test_domain_rejection(L2, K, eps):
    with pytest.raises(DomainError):
        MapDomainPoint(L2, K, eps)


def test_K0():
    r = solve_K0(full=True)
    assert 6.5 < r.value < 7.0 and abs(r.value - 6.87) < 0.01
    assert r.residual <= 1e-12 and ke_residual(r.value) == r.residual
    # independent oracle
    K0 = mp.findroot(lambda K: (K - 1) * (K + 1) ** 3 - mp.e * (K * K - 2 * K - 1) ** 2, 6.87)
    assert r.value == pytest.approx(float(K0), rel=1e-14)
    assert theta_star(r.value) - (r.value + 1) / (r.value - 1) == pytest.approx(0.0, abs=1e-12)


def test_w_endpoint_fractions():
    # (K+1)^3 (K-1) / (K^2-2K-1)^2 at 6.5 and 7, exactly
    for K, frac in ((Fraction(13, 2), Fraction(37125, 12769)), (Fraction(7), Fraction(768, 289))):
        assert (K + 1) ** 3 * (K - 1) / (K * K - 2 * K - 1) ** 2 == frac
    assert w(6.5) == pytest.approx(math.e - 37125 / 12769) and w(6.5) < 0
    assert w(7.0) == pytest.approx(math.e - 768 / 289) and w(7.0) > 0


def test_theta_star_bound():
    assert Fraction(15, 11) ** 3 == 2 + Fraction(713, 1331)
    assert 2 + 713 / 1331 < math.e
    assert all(theta_star(K) > 1.0 for K in np.linspace(6.5, 7.0, 501))
    with pytest.raises(DomainError):
        theta_star(6.4)


@pytest.mark.parametrize("eps", [1e-2, 1e-3, 1e-4])
def test_L2_hat(eps):
    K = 6.87
    Lh = L2_hat(K, eps)
    assert 0.0 < Lh < eps
    assert Lh == pytest.approx(float(mp_L2_hat(K, eps)), rel=1e-12)
    assert abs(derive_params(MapDomainPoint(Lh, K, eps)).L4) <= 1e-12
    assert abs(Lh / eps - (K - 4) / (2 * (K - 1))) <= 2.0 * eps


@given(u_st, K_st, st.sampled_from([1e-2, 1e-3, 1e-4]))
def test_theta6_near_one(u, K, eps):
    c = _chain(u * eps, K, eps)
    assert abs(c.theta6 - 1.0) <= 5 * eps


@given(K_st, eps_st)
@settings(max_examples=30)
def test_theta6_and_L4_strictly_decreasing(K, eps):
    L = np.linspace(-0.999 * eps, 0.999 * eps, 401)
    c = _chain(L, K, eps)
    assert np.all(np.diff(c.theta6) < 0.0)
    assert np.all(np.diff(c.L4) < 0.0)


def test_theta6_matches_high_precision():
    for L2, K, eps in ((3e-4, 6.8, 1e-3), (-5e-3, 6.6, 1e-2)):
        ref = mp_chain(L2, K, eps)
        c = _chain(L2, K, eps)
        assert c.theta6 - 1.0 == pytest.approx(float(ref["theta6"] - 1), rel=1e-11)
        assert c.L4 == pytest.approx(float(ref["L4"]), rel=1e-11)
        assert c.theta3 == pytest.approx(float(ref["theta3"]), rel=1e-13)


@given(u_st, K_st, eps_st)
@settings(max_examples=60, deadline=None)
def test_chain_consistency(u, K, eps):
    # the relations the chain was solved from close to rounding everywhere in U
    r = residuals_B(MapDomainPoint(u * eps, K, eps))
    assert len(r) == len(RESIDUAL_NAMES) == 11
    scale = 1.0 + K
    for name in ("B.1", "B.2", "B.3", "B.5", "B.6", "B.7", "B.8", "B.9", "B.10", "H2"):
        assert abs(r[RESIDUAL_NAMES.index(name)]) <= 1e-12 * scale, name


@given(u_st, K_st, eps_st)
@settings(max_examples=60, deadline=None)
def test_B4_carries_the_fixed_point_defect(u, K, eps):
    pt = MapDomainPoint(u * eps, K, eps)
    d = derive_params(pt)
    r = residuals_B(pt)
    assert r[3] == pytest.approx(math.exp(-d.L4) * (eval_F(pt) - pt.L2), abs=1e-13)


@pytest.mark.parametrize("eps", [1e-2, 1e-3, 1e-4])
def test_fixed_point_equivalence(eps):
    K = 6.9
    for L2 in branch_point(K, eps).fixed_points:
        pt = MapDomainPoint(L2, K, eps)
        assert abs(eval_F(pt) - L2) <= 1e-12
        assert np.max(np.abs(residuals_B(pt))) <= 1e-10
    for L2 in np.linspace(-0.8 * eps, 0.8 * eps, 9):
        pt = MapDomainPoint(L2, K, eps)
        gap = abs(eval_F(pt) - L2)
        res = np.max(np.abs(residuals_B(pt)))
        assert res <= 1e3 * gap + 1e-12
        assert gap <= 1e3 * res + 1e-12


def test_schedule_times():
    d = derive_params(MapDomainPoint(2e-4, 6.87, 1e-3))
    assert d.tau1 == pytest.approx(d.L1 + d.L2 + d.L3 + d.L4 + d.L5)
    assert d.omega == pytest.approx(d.tau3 + d.L3)
    assert 2 * d.L1 + 5 * d.L2 + 5 * d.L3 + 3 * d.L4 + 3 * d.L5 == pytest.approx(1.0, abs=1e-15)
    assert len(d.lengths) == 5 and len(d.thetas) == 6


def test_boundary_slack_admits_solver_iterates():
    MapDomainPoint(1e-3, 6.87, 1e-3)
    MapDomainPoint(0.0, 6.5, 1e-3)
