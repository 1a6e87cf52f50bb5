"""Cancellation-safe scalar kernels.

Every quantity in the reduction chain that is scaled by 1/eps or 1/eps**2
is a Taylor remainder of exp or log1p. Evaluating those remainders as a
difference of O(1) numbers throws away all significant digits once eps is
small, so they are summed directly as series here.
"""
from __future__ import annotations

import math

import numpy as np

__all__ = ["exp_tail", "g_kernel", "log1p_defect", "expm1"]

expm1 = np.expm1

_SERIES_CUTOFF = 0.1
_MAX_TERMS = 400


def exp_tail(n: int, t):
    """Return sum_{k>n} t**k / k!, i.e. exp(t) minus its degree-n Taylor polynomial.

    ``n = -1`` gives exp(t) and ``n = 0`` gives expm1(t). Works elementwise on
    arrays. The series is summed directly, which is accurate for |t| up to a
    few units (the only range the orbit and the integrator ever use).
    """
    if n < -1:
        raise ValueError("n must be >= -1")
    scalar = np.ndim(t) == 0
    t = np.asarray(t, dtype=float)
    if n == -1:
        out = np.exp(t)
    elif n == 0:
        out = np.expm1(t)
    else:
        term = t ** (n + 1) / math.factorial(n + 1)
        out = term.copy()
        k = n + 2
        while k < n + _MAX_TERMS:
            term = term * t / k
            out = out + term
            if np.all(np.abs(term) <= 1e-17 * np.abs(out)):
                break
            k += 1
    return float(out) if scalar else out


def g_kernel(x):
    """Return 1 - (1 - x) * exp(x) = x**2/2 + x**3/3 + x**4/8 + ...

    Written as exp(x) * exp_tail(1, -x) so that no O(1) terms cancel.
    """
    if np.ndim(x):
        x = np.asarray(x, dtype=float)
        return np.exp(x) * exp_tail(1, -x)
    x = float(x)
    return math.exp(x) * exp_tail(1, -x)


def log1p_defect(x):
    """Return (log1p(x) - x) / x = -x/2 + x**2/3 - x**3/4 + ...; the x -> 0 limit is 0."""
    if np.ndim(x):
        x = np.asarray(x, dtype=float)
        small = np.abs(x) < _SERIES_CUTOFF
        out = np.empty_like(x)
        out[small] = _log1p_defect_series(x[small])
        big = ~small
        out[big] = (np.log1p(x[big]) - x[big]) / x[big]
        return out
    x = float(x)
    if abs(x) < _SERIES_CUTOFF:
        return float(_log1p_defect_series(np.asarray(x)))
    return (math.log1p(x) - x) / x


def _log1p_defect_series(x):
    out = np.zeros_like(x)
    power = np.ones_like(x)
    for k in range(1, 40):
        power = -power * x
        out = out + power / (k + 1)
    return out
