"""Problem instance: the piecewise-linear feedback f_K and its ramp fixed points."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError

__all__ = ["FeedbackParams", "FixedPointsOfF", "eval_feedback", "fixed_points"]


@dataclass(frozen=True)
class FeedbackParams:
    """Plateau level ``K`` and ramp half-width ``eps`` of f_K."""

    K: float
    eps: float

    def __post_init__(self):
        K, eps = float(self.K), float(self.eps)
        if not (0.0 < eps < 1.0):
            raise DomainError(f"eps must lie in (0, 1), got {eps!r}")
        if not K > 0.0:
            raise DomainError(f"K must be positive, got {K!r}")
        object.__setattr__(self, "K", K)
        object.__setattr__(self, "eps", eps)

    def require_bifurcation_range(self) -> None:
        if not (6.5 < self.K < 7.0):
            raise DomainError(f"K must lie in (6.5, 7) for bifurcation work, got {self.K!r}")


@dataclass(frozen=True)
class FixedPointsOfF:
    chi_plus: float
    chi_minus: float


def eval_feedback(p: FeedbackParams, x):
    """Evaluate f_K at ``x`` (scalar or array).

    The dead zone is closed, [-1, 1], and so are the plateaus, |x| >= 1+eps.
    Both ramps are written as a function of |x| so that oddness holds bit
    for bit.
    """
    K, eps = p.K, p.eps
    if np.ndim(x):
        x = np.asarray(x, dtype=float)
        ax = np.abs(x)
        mag = np.where(ax <= 1.0, 0.0, np.where(ax >= 1.0 + eps, K, (K / eps) * (ax - 1.0)))
        return np.copysign(mag, x) * (ax > 1.0)
    x = float(x)
    ax = abs(x)
    if ax <= 1.0:
        return 0.0
    mag = K if ax >= 1.0 + eps else (K / eps) * (ax - 1.0)
    return mag if x > 0 else -mag


def fixed_points(p: FeedbackParams) -> FixedPointsOfF:
    """Return chi_plus = K/(K-eps), the ramp solution of x = (K/eps)(x-1), and its mirror."""
    if p.K <= 1.0 + p.eps:
        raise DomainError(f"fixed points leave the ramp unless K > 1 + eps (K={p.K!r}, eps={p.eps!r})")
    chi = p.K / (p.K - p.eps)
    return FixedPointsOfF(chi_plus=chi, chi_minus=-chi)
