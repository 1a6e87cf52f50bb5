"""Exponential-polynomial segments, the single function type used for orbits and histories.

A segment on ``[0, L]`` is stored as

    x(t) = exp(-t) * (d0 + d1 t + ... + dn t**n + c0 * R_n(t)),

with R_n(t) = sum_{k>n} t**k / k!. Expanding R_n shows this equals
``c0 + (a0 + a1 t + ... + an t**n) exp(-t)`` with ``a_k = d_k - c0/k!``, which
is the textbook form. The stored form is preferred because for the ramp
segments c0 is of size K**2/eps**2 while x stays O(1): the textbook form
cancels c0 against a_k and loses about log10(c0) digits, the stored form
cancels nothing. ``d0`` is always the initial value x(0).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numpy.polynomial import polynomial as P

from .kernels import exp_tail
from .roots import newton_bisect

__all__ = ["ExpPolySegment"]


@dataclass(frozen=True)
class ExpPolySegment:
    length: float
    c0: float
    d: tuple[float, ...]

    def __post_init__(self):
        d = tuple(float(v) for v in self.d) or (0.0,)
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "length", float(self.length))
        object.__setattr__(self, "c0", float(self.c0))
        if not all(math.isfinite(v) for v in (self.length, self.c0, *d)):
            raise ValueError("segment coefficients must be finite")
        if self.length < 0.0:
            raise ValueError(f"segment length must be >= 0, got {self.length!r}")

    @classmethod
    def from_standard(cls, length: float, c0: float, a: Sequence[float]) -> "ExpPolySegment":
        """Build from ``c0 + (a0 + a1 t + ...) exp(-t)``."""
        return cls(length, c0, tuple(ak + c0 / math.factorial(k) for k, ak in enumerate(a)))

    @property
    def degree(self) -> int:
        return len(self.d) - 1

    def a(self, k: int) -> float:
        """Coefficient of t**k exp(-t) in the textbook form."""
        dk = self.d[k] if k < len(self.d) else 0.0
        return dk - self.c0 / math.factorial(k)

    a0 = property(lambda self: self.a(0))
    a1 = property(lambda self: self.a(1))
    a2 = property(lambda self: self.a(2))

    # evaluation ---------------------------------------------------------

    def __call__(self, t):
        return self.value(t)

    def value(self, t):
        n = self.degree
        if np.ndim(t):
            t = np.asarray(t, dtype=float)
            return np.exp(-t) * (P.polyval(t, self.d) + self.c0 * exp_tail(n, t))
        t = float(t)
        return math.exp(-t) * (float(P.polyval(t, self.d)) + self.c0 * exp_tail(n, t))

    def forcing(self, t):
        """Return x'(t) + x(t), the right-hand side the segment was built from."""
        n = self.degree
        dd = P.polyder(self.d) if n > 0 else (0.0,)
        if np.ndim(t):
            t = np.asarray(t, dtype=float)
            return np.exp(-t) * (P.polyval(t, dd) + self.c0 * exp_tail(n - 1, t))
        t = float(t)
        return math.exp(-t) * (float(P.polyval(t, dd)) + self.c0 * exp_tail(n - 1, t))

    def derivative(self, t):
        return self.forcing(t) - self.value(t)

    @property
    def start(self) -> float:
        return self.d[0]

    @property
    def end(self) -> float:
        return self.value(self.length)

    # transformations -----------------------------------------------------

    def negated(self) -> "ExpPolySegment":
        return ExpPolySegment(self.length, -self.c0, tuple(-v for v in self.d))

    def with_length(self, length: float) -> "ExpPolySegment":
        return ExpPolySegment(length, self.c0, self.d)

    def restrict(self, s0: float, s1: float | None = None) -> "ExpPolySegment":
        """Return the piece on ``[s0, s1]`` re-anchored so that it starts at local time 0."""
        s1 = self.length if s1 is None else s1
        if not (0.0 <= s0 <= s1):
            raise ValueError(f"invalid restriction [{s0!r}, {s1!r}]")
        if s0 == 0.0:
            return ExpPolySegment(s1, self.c0, self.d)
        n = self.degree
        es = math.exp(-s0)
        dk = []
        der = np.asarray(self.d, dtype=float)
        for k in range(n + 1):
            val = float(P.polyval(s0, der)) if der.size else 0.0
            dk.append(es * (val + self.c0 * exp_tail(n - k, s0)) / math.factorial(k))
            der = P.polyder(der) if der.size > 1 else np.zeros(0)
        return ExpPolySegment(s1 - s0, self.c0, tuple(dk))

    # shape ---------------------------------------------------------------

    def critical_points(self) -> list[float]:
        """Zeros of x' in the open interval (0, length), ascending.

        x' = exp(-t) (D'(t) - D(t) + c0 t**n / n!), so the zeros are the roots
        of that polynomial.
        """
        n = self.degree
        poly = -np.asarray(self.d, dtype=float)
        if n > 0:
            poly[:-1] += P.polyder(self.d)
        poly[n] += self.c0 / math.factorial(n)
        poly = np.trim_zeros(poly, "b")
        if poly.size <= 1:
            return []
        L = self.length
        out = []
        for r in P.polyroots(poly):
            if abs(r.imag) > 1e-9 * max(1.0, abs(r.real)):
                continue
            t = r.real
            if not (0.0 < t < L):
                continue
            dp = P.polyder(poly)
            for _ in range(3):
                fp = float(P.polyval(t, dp))
                if fp == 0.0:
                    break
                t -= float(P.polyval(t, poly)) / fp
            if 0.0 < t < L:
                out.append(t)
        return sorted(out)

    def breakpoints(self) -> list[float]:
        """``[0, critical points..., length]``; the segment is monotone between consecutive entries."""
        return [0.0, *self.critical_points(), self.length]

    def extrema(self) -> tuple[float, float]:
        """Exact (min, max) over the closed interval."""
        vals = [self.value(t) for t in self.breakpoints()]
        return min(vals), max(vals)

    def level_crossings(self, level: float, lo: float = 0.0, hi: float | None = None) -> list[float]:
        """Times in ``(lo, hi)`` where the segment takes the value ``level`` with a sign change."""
        hi = self.length if hi is None else hi
        pts = [lo] + [t for t in self.critical_points() if lo < t < hi] + [hi]
        out = []
        f = lambda t: self.value(t) - level
        for u, v in zip(pts[:-1], pts[1:]):
            fu, fv = f(u), f(v)
            if fu == 0.0 or fv == 0.0 or (fu > 0) == (fv > 0):
                continue
            r, _ = newton_bisect(f, self.derivative, u, v, what="level crossing")
            if lo < r < hi:
                out.append(r)
        return out
