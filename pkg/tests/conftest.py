"""Shared fixtures and the high-precision reference for F.

``mp_F`` evaluates the reduction chain literally, with no rearrangement to
avoid cancellation, at 60 significant digits. It is the oracle for the
double-precision implementation.
"""
from __future__ import annotations

import mpmath as mp
import pytest

from dde_fold.bifurcation import branch_point, locate_fold
from dde_fold.orbit import assemble_profile
from dde_fold.reduced_map import MapDomainPoint

mp.mp.dps = 60


def mp_chain(L2, K, eps):
    L2, K, e = mp.mpf(L2), mp.mpf(K), mp.mpf(eps)
    a = K - 1 - e
    L3 = mp.log((K - 1) / a)
    th5 = (1 + e) * mp.exp(-L2)
    th6 = (1 + e) * a / (K - 1) * mp.exp(-L2) + K / e * a * L3 - K
    L4 = mp.log((K + th6) / (K + 1))
    th2 = (K * mp.exp(-L2) - mp.exp(mp.mpf(-0.5)) * (K - 1) * (K + th6) ** 1.5 / a ** 1.5
           + K / e * ((1 + e) * L2 * mp.exp(-L2) + mp.exp(-L2) - 1))
    th3 = (th2 * mp.exp(-L3) + K / e * ((1 + e) * L3 * mp.exp(-L2 - L3) + mp.exp(-L3) - 1)
           - K ** 2 / e ** 2 * (K - 1) * (1 - (1 + L3 + L3 ** 2 / 2) * mp.exp(-L3)))
    T1 = K / e * (K + 1) * (1 - (1 - L4) * mp.exp(L4))
    F = T1 + th3 - (1 + e) * (K + th6) / (K - 1) * mp.exp(-L2) + L2
    return {"L3": L3, "L4": L4, "theta2": th2, "theta3": th3, "theta5": th5, "theta6": th6, "T1": T1, "F": F}


def mp_F(L2, K, eps):
    return mp_chain(L2, K, eps)["F"]


def mp_L2_hat(K, eps):
    K, e = mp.mpf(K), mp.mpf(eps)
    a = K - 1 - e
    return mp.log((1 + e) * a / (K - 1)) - mp.log(K + 1 - K / e * a * mp.log((K - 1) / a))


@pytest.fixture(scope="session")
def fold_1e3():
    return locate_fold(1e-3)


@pytest.fixture(scope="session")
def lower_point(fold_1e3):
    K = fold_1e3.K_star + 1e-4
    return MapDomainPoint(branch_point(K, 1e-3).fixed_points[0], K, 1e-3)


@pytest.fixture(scope="session")
def profile(lower_point):
    return assemble_profile(lower_point)
