"""Exception and warning types shared across the package."""
from __future__ import annotations

__all__ = [
    "DomainError",
    "ConvergenceError",
    "CertificationError",
    "DegreeOverflowError",
    "EventClusterWarning",
    "DerivedDomainWarning",
]


class DomainError(ValueError):
    """An input lies outside the region where a quantity is defined."""


class ConvergenceError(RuntimeError):
    """A root finder lost its bracket or ran out of iterations."""


class CertificationError(RuntimeError):
    """A computed object failed one of its own consistency checks."""


class DegreeOverflowError(RuntimeError):
    """Exact propagation would need a polynomial degree above the configured cap."""


class DerivedDomainWarning(RuntimeWarning):
    """K + theta6 <= 0, so L4 is undefined; the value is reported as NaN."""


class EventClusterWarning(RuntimeWarning):
    """Two threshold crossings were closer than the merge tolerance."""
