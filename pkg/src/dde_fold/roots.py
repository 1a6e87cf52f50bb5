"""Safeguarded Newton iteration on a sign-change bracket."""
from __future__ import annotations

import math
from typing import Callable

from .errors import ConvergenceError

__all__ = ["newton_bisect"]


def newton_bisect(
    f: Callable[[float], float],
    df: Callable[[float], float] | None,
    lo: float,
    hi: float,
    *,
    xtol: float = 0.0,
    rtol: float = 4.0 * 2.2e-16,
    ftol: float = 0.0,
    maxiter: int = 200,
    what: str = "root",
    x0: float | None = None,
) -> tuple[float, int]:
    """Find a zero of ``f`` in ``[lo, hi]``.

    Newton steps are taken when they land strictly inside the current
    bracket; otherwise, or when a Newton step fails to halve |f|, the
    bracket is bisected. With ``df=None`` the secant through the bracket
    ends replaces the derivative. ``x0`` is an optional starting point.
    Returns ``(root, iterations)``.

    Raises ConvergenceError when ``f(lo)`` and ``f(hi)`` have the same sign
    or the iteration budget is exhausted.
    """
    flo, fhi = f(lo), f(hi)
    if flo == 0.0:
        return lo, 0
    if fhi == 0.0:
        return hi, 0
    if (flo > 0) == (fhi > 0):
        raise ConvergenceError(f"no bracket for {what}: f({lo!r})={flo!r}, f({hi!r})={fhi!r}")

    if x0 is not None and lo < x0 < hi:
        x, fx = x0, f(x0)
    else:
        x, fx = (lo, flo) if abs(flo) < abs(fhi) else (hi, fhi)

    for it in range(1, maxiter + 1):
        if fx == 0.0:
            return x, it
        slope = df(x) if df is not None else (fhi - flo) / (hi - lo)
        newton = slope != 0.0 and math.isfinite(slope) and lo < x - fx / slope < hi
        x_new = x - fx / slope if newton else 0.5 * (lo + hi)
        f_new = f(x_new)
        step = abs(x_new - x)
        if (f_new > 0) == (flo > 0):
            lo, flo = x_new, f_new
        else:
            hi, fhi = x_new, f_new
        slow = newton and abs(f_new) > 0.5 * abs(fx)
        x, fx = x_new, f_new
        tol = xtol + rtol * abs(x)
        if hi - lo <= tol or abs(fx) <= ftol or (newton and step <= 0.5 * tol):
            return x, it
        if slow:
            mid = 0.5 * (lo + hi)
            fm = f(mid)
            if (fm > 0) == (flo > 0):
                lo, flo = mid, fm
            else:
                hi, fhi = mid, fm
            x, fx = mid, fm
    raise ConvergenceError(f"max iterations reached for {what} (bracket [{lo!r}, {hi!r}])")
