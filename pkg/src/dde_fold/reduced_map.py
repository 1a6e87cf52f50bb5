"""The closed-form reduction chain and the scalar map F(L2, K, eps).

A large-amplitude periodic solution is described by five durations L1..L5
and six levels theta1..theta6. The boundary relations between consecutive
exponential pieces can be solved for everything except L2, leaving the
single fixed-point equation F(L2, K, eps) = L2.

Several terms carry a factor K/eps or K**2/eps**2 in front of a quantity of
size eps**2 or eps**3. Those quantities are evaluated as Taylor remainders
(see ``kernels``) so that F keeps full relative accuracy for small eps.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, fields
from types import SimpleNamespace

import numpy as np

from .errors import DerivedDomainWarning, DomainError
from .kernels import exp_tail, g_kernel, log1p_defect
from .roots import newton_bisect

__all__ = [
    "MapDomainPoint",
    "DerivedParams",
    "derive_params",
    "eval_F",
    "F_array",
    "residuals_B",
    "RESIDUAL_NAMES",
    "theta_star",
    "solve_K0",
    "K0Result",
    "ke_residual",
    "w",
    "L2_hat",
    "K_RANGE",
]

K_RANGE = (6.5, 7.0)
_SLACK = 1e-15
_E_HALF = math.exp(-0.5)


@dataclass(frozen=True)
class MapDomainPoint:
    """A point of U = {(L2, K, eps): |L2| < eps, 6.5 < K < 7, 0 < eps < 1}."""

    L2: float
    K: float
    eps: float

    def __post_init__(self):
        for f in fields(self):
            object.__setattr__(self, f.name, float(getattr(self, f.name)))
        check_domain(self.L2, self.K, self.eps)

    @property
    def in_V(self) -> bool:
        """True when 0 < L2 < L2_hat(K, eps), where the orbit construction is valid."""
        return 0.0 < self.L2 < L2_hat(self.K, self.eps)


def check_domain(L2, K: float, eps: float) -> None:
    if not (0.0 < eps < 1.0):
        raise DomainError(f"eps must lie in (0, 1), got {eps!r}")
    lo, hi = K_RANGE
    if not (lo - _SLACK < K < hi + _SLACK):
        raise DomainError(f"K must lie in (6.5, 7), got {K!r}")
    bound = eps * (1.0 + _SLACK) + _SLACK
    if np.any(np.abs(L2) >= bound) or np.any(np.isnan(L2)):
        raise DomainError(f"L2 must lie in (-eps, eps) = (-{eps!r}, {eps!r})")


@dataclass(frozen=True)
class DerivedParams:
    L1: float
    L3: float
    L4: float
    L5: float
    theta1: float
    theta2: float
    theta3: float
    theta4: float
    theta5: float
    theta6: float
    tau1: float
    tau2: float
    tau3: float
    omega: float
    L2: float
    K: float
    eps: float

    @property
    def lengths(self) -> tuple[float, float, float, float, float]:
        return (self.L1, self.L2, self.L3, self.L4, self.L5)

    @property
    def thetas(self) -> tuple[float, ...]:
        return (self.theta1, self.theta2, self.theta3, self.theta4, self.theta5, self.theta6)


def _chain(L2, K: float, eps: float) -> SimpleNamespace:
    """Evaluate the reduction chain; ``L2`` may be an array, K and eps are scalars.

    Besides the named quantities the namespace carries the small remainders
    (theta5 - 1, theta6 - 1, ...) that the derivative code reuses.
    """
    arr = np.ndim(L2) > 0
    L2 = np.asarray(L2, dtype=float) if arr else float(L2)
    a = K - 1.0 - eps
    x = eps / a
    L3 = math.log1p(x)
    eL3 = a / (K - 1.0)                    # exp(-L3)
    ell = log1p_defect(x)                  # (K/eps) a L3 - K = K ell
    q_m1 = eps * (K - 2.0 - eps) / (K - 1.0)

    eL2 = np.exp(-L2)
    em1 = np.expm1(-L2)
    L5 = math.log1p(2.0 / (K - 1.0)) - L2
    theta4 = (1.0 + eps) * (K + 1.0) / (K - 1.0) * eL2
    theta5 = (1.0 + eps) * eL2
    theta5m1 = eps * eL2 + em1
    theta6m1 = q_m1 * eL2 + em1 + K * ell
    theta6 = 1.0 + theta6m1
    Kp = K + theta6
    bad = Kp <= 0.0
    if np.any(bad):
        warnings.warn("K + theta6 <= 0; L4 is undefined", DerivedDomainWarning, stacklevel=3)
        Kp = np.where(bad, np.nan, Kp) if arr else math.nan
    L4 = np.log1p(theta6m1 / (K + 1.0))
    # same as 1/2 - L2 + 5/2 ln(K-1-eps) - 3/2 ln(K+theta6) - ln(K-1), but built from
    # the very floats the schedule uses, so the length constraint closes to an ulp
    L1 = 0.5 * (1.0 - 5.0 * L2 - 5.0 * L3 - 3.0 * L4 - 3.0 * L5)
    A = _E_HALF * (K - 1.0) * (Kp / a) ** 1.5
    theta1 = K - np.exp(L2) * A
    theta2 = K * eL2 - A + K * L2 * eL2 - (K / eps) * g_kernel(-L2)
    h3 = eL3 * exp_tail(2, L3)
    theta3 = (
        theta2 * eL3
        + (K / eps) * theta5m1 * L3 * eL3
        - (K / eps) * g_kernel(-L3)
        - (K * K / (eps * eps)) * (K - 1.0) * h3
    )
    T1 = (K / eps) * (K + 1.0) * g_kernel(L4)
    T3 = (1.0 + eps) * Kp / (K - 1.0) * eL2
    F = T1 + theta3 - T3 + L2

    tau1 = L1 + L2 + L3 + L4 + L5
    tau2 = tau1 + L2 + L3 + L4
    tau3 = tau2 + L2 + L5
    omega = tau3 + L3
    return SimpleNamespace(
        L2=L2, K=K, eps=eps, a=a, L1=L1, L3=L3, L4=L4, L5=L5,
        theta1=theta1, theta2=theta2, theta3=theta3, theta4=theta4, theta5=theta5, theta6=theta6,
        theta5m1=theta5m1, theta6m1=theta6m1, Kp=Kp, A=A, eL2=eL2, eL3=eL3, ell=ell, h3=h3,
        T1=T1, T3=T3, F=F, tau1=tau1, tau2=tau2, tau3=tau3, omega=omega,
    )


def derive_params(pt: MapDomainPoint) -> DerivedParams:
    """Evaluate L1, L3..L5, theta1..theta6 and the schedule times at ``pt``.

    K + theta6 <= 0 is reported with a DerivedDomainWarning and yields NaN
    for L4 and everything depending on it.
    """
    c = _chain(pt.L2, pt.K, pt.eps)
    return DerivedParams(
        **{f.name: float(getattr(c, f.name)) for f in fields(DerivedParams)}
    )


def eval_F(pt: MapDomainPoint) -> float:
    return float(_chain(pt.L2, pt.K, pt.eps).F)


def F_array(L2, K: float, eps: float) -> np.ndarray:
    """Vectorised F over an array of L2 values at fixed (K, eps)."""
    L2 = np.atleast_1d(np.asarray(L2, dtype=float))
    check_domain(L2, K, eps)
    return _chain(L2, K, eps).F


RESIDUAL_NAMES = tuple(f"B.{i}" for i in range(1, 11)) + ("H2",)


def residuals_B(pt: MapDomainPoint) -> np.ndarray:
    """Return lhs - rhs of the ten boundary relations and of the length constraint.

    Each right-end boundary value is evaluated from its exponential segment
    (see ``orbit.build_segments``) at the unclamped length, so the residuals
    measure how well the chain output closes the segment system anywhere in
    U. Only B.4 is not built into the chain; it equals exp(-L4) (F - L2).
    The length constraint is what defines L1, so its residual is zero up to
    rounding.
    """
    from .orbit import _raw_lengths, _segments_from_chain

    c = _chain(pt.L2, pt.K, pt.eps)
    ys = _segments_from_chain(c)
    eps = pt.eps
    targets = (c.theta1, c.theta2, c.theta3, c.theta4, 1.0 + eps,
               c.theta5, c.theta6, 1.0, -1.0, -1.0 - eps)
    res = [float(y.value(L) - t) for y, L, t in zip(ys, _raw_lengths(c), targets)]
    h2 = 2 * c.L1 + 5 * c.L2 + 5 * c.L3 + 3 * c.L4 + 3 * c.L5 - 1.0
    res.append(float(h2))
    return np.array(res)


def theta_star(Kbar: float) -> float:
    """Limit of theta3 as eps -> 0 with K -> Kbar."""
    if not (K_RANGE[0] <= Kbar <= K_RANGE[1]):
        raise DomainError(f"Kbar must lie in [6.5, 7], got {Kbar!r}")
    return Kbar - math.sqrt((Kbar + 1.0) ** 3 / (math.e * (Kbar - 1.0)))


def w(K: float) -> float:
    """e - (K+1)^3 (K-1) / (K^2-2K-1)^2; its zero in (6.5, 7) is K0."""
    return math.e - (K + 1.0) ** 3 * (K - 1.0) / (K * K - 2.0 * K - 1.0) ** 2


def _ke(K: float) -> float:
    return (K - 1.0) * (K + 1.0) ** 3 - math.e * (K * K - 2.0 * K - 1.0) ** 2


def _ke_prime(K: float) -> float:
    return (K + 1.0) ** 3 + 3.0 * (K - 1.0) * (K + 1.0) ** 2 - 2.0 * math.e * (K * K - 2.0 * K - 1.0) * (2.0 * K - 2.0)


def ke_residual(K: float) -> float:
    """Residual of (K-1)(K+1)^3 = e (K^2-2K-1)^2 relative to the size of its terms."""
    return abs(_ke(K)) / ((K - 1.0) * (K + 1.0) ** 3)


@dataclass(frozen=True)
class K0Result:
    value: float
    residual: float
    iterations: int
    bracket: tuple[float, float]


def solve_K0(*, full: bool = False):
    """Root K0 of (K-1)(K+1)^3 - e (K^2-2K-1)^2 in (6.5, 7).

    Returns the float, or a K0Result with the relative residual and the
    iteration count when ``full`` is set.
    """
    lo, hi = K_RANGE
    K0, its = newton_bisect(_ke, _ke_prime, lo, hi, rtol=1e-15, what="K0")
    if full:
        return K0Result(K0, ke_residual(K0), its, (lo, hi))
    return K0


def L2_hat(K: float, eps: float) -> float:
    """The L2 at which theta6 = 1, i.e. L4 = 0.

    Written as log1p(q - 1) - log1p(-K ell) with q = (1+eps)(K-1-eps)/(K-1)
    and K ell = (K/eps)(K-1-eps) ln((K-1)/(K-1-eps)) - K.
    """
    if not (0.0 < eps < 1.0):
        raise DomainError(f"eps must lie in (0, 1), got {eps!r}")
    if not (K_RANGE[0] - _SLACK < K < K_RANGE[1] + _SLACK):
        raise DomainError(f"K must lie in (6.5, 7), got {K!r}")
    a = K - 1.0 - eps
    K_ell = K * log1p_defect(eps / a)
    if 1.0 - K_ell <= 0.0:
        raise DomainError("second logarithm argument of L2_hat is not positive")
    q_m1 = eps * (K - 2.0 - eps) / (K - 1.0)
    return math.log1p(q_m1) - math.log1p(-K_ell)
