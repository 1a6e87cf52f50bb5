"""Hand-differentiated partial derivatives of F, checked against finite differences.

Every derivative is obtained by differentiating the reduction chain one link
at a time; the helper quantities below (theta6_K, L4_K, ...) are the
derivatives of the individual links.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DomainError
from .kernels import g_kernel
from .reduced_map import MapDomainPoint, _chain, check_domain

__all__ = ["MapJet", "jet", "jet_from_chain", "FDCheck", "fd_check", "theta6_L2_derivatives"]

_E_HALF = math.exp(-0.5)


@dataclass(frozen=True)
class MapJet:
    F: float
    dF_dK: float
    dF_dL2: float
    d2F_dL2sq: float


def _dF_dK(c) -> float:
    K, eps, a, Kp = c.K, c.eps, c.a, c.Kp
    theta6_K = (eps * (1.0 + eps) * c.eL2 / (K - 1.0) ** 2
                + K * eps / (a * (K - 1.0)) + (1.0 + K / a) * c.ell)
    L4_K = ((K + 1.0) * theta6_K - c.theta6m1) / (Kp * (K + 1.0))
    T1_K = (2.0 * K + 1.0) / eps * g_kernel(c.L4) + (K / eps) * c.L4 * Kp * L4_K
    L3_K = -eps / ((K - 1.0) * a)
    A_K = c.A * (1.0 / (K - 1.0) + 1.5 * (1.0 + theta6_K) / Kp - 1.5 / a)
    theta2_K = c.eL2 - A_K + c.L2 * c.eL2 - g_kernel(-c.L2) / eps
    B3 = c.theta5m1 * c.L3 * c.eL3 - g_kernel(-c.L3)
    S2_K = B3 / eps + K / (K - 1.0) ** 2 * (c.theta5 * c.L3 - c.theta5m1)
    S3_K = (3.0 * K * K - 2.0 * K) / eps ** 2 * c.h3 - K * K * c.L3 ** 2 / (2.0 * eps * (K - 1.0))
    theta3_K = theta2_K * c.eL3 - c.theta2 * c.eL3 * L3_K + S2_K - S3_K
    T3_K = (1.0 + eps) * c.eL2 / (K - 1.0) * (1.0 + theta6_K - Kp / (K - 1.0))
    return T1_K + theta3_K - T3_K


def theta6_L2_derivatives(c) -> tuple[float, float]:
    """First and second L2-derivatives of theta6; the second is minus the first."""
    d1 = -(1.0 + c.eps) * c.eL3 * c.eL2
    return d1, -d1


def _dF_dL2(c) -> tuple[float, float]:
    K, eps, a, Kp = c.K, c.eps, c.a, c.Kp
    th6L, _ = theta6_L2_derivatives(c)
    r = K / eps
    sq = math.sqrt(Kp)
    pref = (1.0 + eps) * c.eL2 * c.eL3
    th3L = 1.5 * _E_HALF * pref * sq / math.sqrt(a) - r * pref * (c.L2 + c.L3)
    third = (1.0 + eps) / (K - 1.0) * c.eL2
    FL = 1.0 + r * c.L4 * th6L + th3L + third * (Kp - th6L)
    th3LL = (1.5 * _E_HALF * pref / math.sqrt(a) * (th6L / (2.0 * sq) - sq)
             - r * pref * (1.0 - c.L2 - c.L3))
    FLL = r * th6L * (th6L / Kp - c.L4) + th3LL - third * (Kp - 3.0 * th6L)
    return FL, FLL


def jet_from_chain(c) -> MapJet:
    FL, FLL = _dF_dL2(c)
    return MapJet(float(c.F), float(_dF_dK(c)), float(FL), float(FLL))


def jet(pt: MapDomainPoint) -> MapJet:
    """F together with dF/dK, dF/dL2 and d2F/dL2^2 at ``pt``."""
    return jet_from_chain(_chain(pt.L2, pt.K, pt.eps))


@dataclass(frozen=True)
class FDCheck:
    """Relative discrepancies between analytic and central-difference derivatives."""

    dF_dK: float
    dF_dL2: float
    d2F_dL2sq: float
    h_K: float
    h_L2: float

    def max_first(self) -> float:
        return max(self.dF_dK, self.dF_dL2)


def fd_check(pt: MapDomainPoint, h_L2: float | None = None, h_K: float = 1e-5) -> FDCheck:
    """Compare ``jet(pt)`` with central differences of F.

    ``h_L2`` defaults to 1e-3 * eps since eps is the natural scale of L2.
    Raises DomainError when a stencil point leaves U.
    """
    L2, K, eps = pt.L2, pt.K, pt.eps
    h_L2 = 1e-3 * eps if h_L2 is None else float(h_L2)
    if h_L2 <= 0.0 or h_K <= 0.0:
        raise DomainError("finite-difference steps must be positive")
    try:
        for dl, dk in ((h_L2, 0.0), (-h_L2, 0.0), (0.0, h_K), (0.0, -h_K)):
            check_domain(L2 + dl, K + dk, eps)
    except DomainError as exc:
        raise DomainError(f"finite-difference stencil leaves the domain: {exc}") from None
    F = lambda l, k: float(_chain(l, k, eps).F)
    j = jet(pt)
    f0 = j.F
    fp, fm = F(L2 + h_L2, K), F(L2 - h_L2, K)
    fd_L = (fp - fm) / (2.0 * h_L2)
    fd_LL = (fp - 2.0 * f0 + fm) / h_L2 ** 2
    fd_K = (F(L2, K + h_K) - F(L2, K - h_K)) / (2.0 * h_K)
    rel = lambda an, fd: abs(an - fd) / max(abs(an), 1e-300)
    return FDCheck(rel(j.dF_dK, fd_K), rel(j.dF_dL2, fd_L), rel(j.d2F_dL2sq, fd_LL), h_K, h_L2)
