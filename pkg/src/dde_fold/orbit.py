"""Periodic profile p assembled from the ten exponential pieces y1..y10.

On [-1, -1+omega] the profile runs through y1..y10 with lengths
L1, L2, L3, L4, L5, L2, L3, L4, L2+L5, L3; on [-1+omega, -1+2*omega] it is
the negated copy, and it repeats with period 2*omega.
"""
from __future__ import annotations

import bisect
import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ._io import atomic_write_text, csv_text, json_text
from .errors import CertificationError, DomainError
from .params import FeedbackParams, eval_feedback
from .reduced_map import MapDomainPoint, _chain, L2_hat
from .segments import ExpPolySegment

__all__ = [
    "build_segments",
    "PeriodicProfile",
    "HypothesisReport",
    "assemble_profile",
    "check_hypotheses",
    "SEGMENT_BOUNDS",
    "FIXED_POINT_TOL",
    "JOIN_TOL",
]

FIXED_POINT_TOL = 1e-10
JOIN_TOL = 1e-12
H2_TOL = 1e-12
H4_TOL = 1e-10


def _raw_lengths(c) -> tuple:
    return (c.L1, c.L2, c.L3, c.L4, c.L5, c.L2, c.L3, c.L4, c.L2 + c.L5, c.L3)


def _segments_from_chain(c) -> list[ExpPolySegment]:
    K, eps = c.K, c.eps
    r = K / eps
    table = [
        (c.L1, K, (1.0 + eps,)),
        (c.L2, -r, (c.theta1, K)),
        (c.L3, -r - r * r * (K - 1.0), (c.theta2, r * c.theta5m1, -0.5 * r)),
        (c.L4, -r * (K + 1.0), (c.theta3, r * c.theta6m1)),
        (c.L5, 0.0, (c.theta4,)),
        (c.L2, 0.0, (1.0 + eps,)),
        (c.L3, -r * (K - 1.0), (c.theta5, 0.0)),
        (c.L4, -K, (c.theta6,)),
        (c.L2 + c.L5, -K, (1.0,)),
        (c.L3, -K, (-1.0,)),
    ]
    # lengths may be negative off the valid region; keep the formula, clamp the domain
    return [ExpPolySegment(max(float(L), 0.0), c0, d) for L, c0, d in table]


def _chain_of(pt: MapDomainPoint):
    c = _chain(pt.L2, pt.K, pt.eps)
    if not math.isfinite(c.L4):
        raise DomainError("K + theta6 <= 0: L4 undefined")
    return c


def build_segments(pt: MapDomainPoint, *, force: bool = False) -> list[ExpPolySegment]:
    """Return y1..y10 for ``pt``.

    Outside V (L2 <= 0 or L2 >= L2_hat, equivalently L2 <= 0 or L4 <= 0) the
    construction is undefined and a DomainError is raised unless ``force`` is
    set, in which case nonpositive lengths are clamped to zero.
    """
    if not force and not pt.in_V:
        raise DomainError(
            f"orbit construction undefined: L4 <= 0 or L2 <= 0 "
            f"(L2={pt.L2!r}, L2_hat={L2_hat(pt.K, pt.eps)!r})"
        )
    return _segments_from_chain(_chain_of(pt))


# bounds each piece must respect strictly on the interior of its domain
def _bounds(eps: float):
    big = math.inf
    top = (1.0 + eps, big)
    ramp = (1.0, 1.0 + eps)
    return [top] * 5 + [ramp] * 3 + [(-1.0, 1.0), (-1.0 - eps, -1.0)]


SEGMENT_BOUNDS = _bounds


@dataclass(frozen=True)
class PeriodicProfile:
    """The periodic function p, stored as 20 pieces starting at t = -1."""

    offsets: tuple[float, ...]
    segments: tuple[ExpPolySegment, ...]
    signs: tuple[int, ...]
    omega: float
    eps: float
    K: float
    L2: float

    @property
    def period(self) -> float:
        return 2.0 * self.omega

    def _locate(self, t: float) -> tuple[int, float]:
        u = (t + 1.0) % self.period
        i = bisect.bisect_right(self.offsets, u - 1.0) - 1
        i = min(max(i, 0), len(self.segments) - 1)
        s = u - 1.0 - self.offsets[i]
        return i, min(max(s, 0.0), self.segments[i].length)

    def evaluate(self, t):
        if np.ndim(t):
            return np.array([self.evaluate(float(v)) for v in np.ravel(t)]).reshape(np.shape(t))
        i, s = self._locate(float(t))
        return self.segments[i].value(s)

    __call__ = evaluate

    def derivative(self, t):
        if np.ndim(t):
            return np.array([self.derivative(float(v)) for v in np.ravel(t)]).reshape(np.shape(t))
        i, s = self._locate(float(t))
        return self.segments[i].derivative(s)

    def joins(self) -> list[tuple[float, float]]:
        """(time, |left - right|) at every join, including the wrap from the last piece to the first."""
        out = []
        n = len(self.segments)
        for i in range(n):
            seg, nxt = self.segments[i], self.segments[(i + 1) % n]
            t = self.offsets[i] + seg.length
            out.append((t, abs(seg.end - nxt.start)))
        return out

    def max_join_defect(self) -> float:
        return max(d for _, d in self.joins())

    def sample(self, n: int) -> tuple[np.ndarray, np.ndarray]:
        """``n`` equally spaced samples over one period starting at t = -1 (endpoint excluded)."""
        t = -1.0 + self.period * np.arange(n) / n
        return t, self.evaluate(t)

    def extrema_counts(self, n: int = 10_000) -> tuple[int, int]:
        """Number of strict local maxima and minima of the cyclic sample sequence."""
        _, x = self.sample(n)
        dx = np.diff(np.append(x, x[0]))
        s = np.sign(dx[dx != 0.0])
        if s.size == 0:
            return 0, 0
        prev = np.roll(s, 1)
        return int(np.sum((prev > 0) & (s < 0))), int(np.sum((prev < 0) & (s > 0)))

    def history_pieces(self, t0: float = 0.0) -> list[tuple[float, ExpPolySegment]]:
        """Pieces of p restricted to [t0 - 1, t0], offsets relative to t0."""
        lo, hi = t0 - 1.0, t0
        out = []
        k0 = math.floor((lo + 1.0) / self.period)
        base = -1.0 + k0 * self.period
        while base < hi:
            for off, seg in zip(self.offsets, self.segments):
                a, b = base + off + 1.0, base + off + 1.0 + seg.length
                s0, s1 = max(a, lo), min(b, hi)
                if s1 - s0 > 0.0:
                    out.append((s0 - t0, seg.restrict(s0 - a, s1 - a)))
            base += self.period
        return out

    # export --------------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "K": self.K,
            "eps": self.eps,
            "L2": self.L2,
            "omega": self.omega,
            "segments": [
                {"offset": o, "sign": s, "length": g.length, "c0": g.c0, "d": list(g.d)}
                for o, g, s in zip(self.offsets, self.segments, self.signs)
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "PeriodicProfile":
        segs = data["segments"]
        return cls(
            offsets=tuple(float(s["offset"]) for s in segs),
            segments=tuple(ExpPolySegment(s["length"], s["c0"], tuple(s["d"])) for s in segs),
            signs=tuple(int(s["sign"]) for s in segs),
            omega=float(data["omega"]),
            eps=float(data["eps"]),
            K=float(data["K"]),
            L2=float(data["L2"]),
        )

    def to_json(self) -> str:
        return json_text(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "PeriodicProfile":
        return cls.from_dict(json.loads(text))

    def to_csv(self, n: int = 2000) -> str:
        t, x = self.sample(n)
        return csv_text(("t", "p"), zip(t, x))

    def write(self, path, fmt: str = "csv", n: int = 2000):
        text = self.to_csv(n) if fmt == "csv" else self.to_json()
        return atomic_write_text(path, text)


@dataclass(frozen=True)
class HypothesisReport:
    h1_ok: bool
    h2_ok: bool
    h3_ok: bool
    h4_ok: bool
    h5_ok: bool
    violations: tuple[tuple[str, str, float], ...] = field(default=())

    @property
    def all_ok(self) -> bool:
        return self.h1_ok and self.h2_ok and self.h3_ok and self.h4_ok and self.h5_ok

    def to_dict(self) -> dict:
        return {
            "H1": self.h1_ok, "H2": self.h2_ok, "H3": self.h3_ok, "H4": self.h4_ok, "H5": self.h5_ok,
            "violations": [list(v) for v in self.violations],
        }


def _interior_margin(seg: ExpPolySegment, lo: float, hi: float, tol: float) -> tuple[float, str]:
    """Smallest distance from the open band (lo, hi) over the open interval (0, L).

    Positive means strictly inside. Interior critical values are exact
    extrema. An endpoint sitting on a bound (within ``tol``) is fine as long
    as the segment leaves it inward; an endpoint outside the band means
    points near it are outside too.
    """
    worst, where = math.inf, "interior"
    L = seg.length
    for t in seg.critical_points():
        v = seg.value(t)
        m = min(v - lo, hi - v)
        if m < worst:
            worst, where = m, f"t={t!r}"
    for t, inward in ((0.0, 1.0), (L, -1.0)):
        v = seg.value(t)
        slope = seg.derivative(t)
        for gap, sgn in ((v - lo, 1.0), (hi - v, -1.0)):
            if math.isinf(gap):
                continue
            if abs(gap) <= tol:
                # moving into the band means d/dt (sgn * x) * inward > 0
                m = math.inf if sgn * slope * inward > 0.0 else -abs(slope) - 1e-300
            else:
                m = gap
            if m < worst:
                worst, where = m, f"t={t!r} (endpoint)"
    return worst, where


def check_hypotheses(pt: MapDomainPoint) -> HypothesisReport:
    """Check the five structural hypotheses at ``pt``; violations are reported, never raised."""
    c = _chain(pt.L2, pt.K, pt.eps)
    eps = pt.eps
    viol: list[tuple[str, str, float]] = []

    lengths = {"L1": c.L1, "L2": c.L2, "L3": c.L3, "L4": c.L4, "L5": c.L5}
    for name, v in lengths.items():
        if not v > 0.0:
            viol.append(("H1", name, float(v)))
    h1 = not any(v[0] == "H1" for v in viol)

    h2_res = 2 * c.L1 + 5 * c.L2 + 5 * c.L3 + 3 * c.L4 + 3 * c.L5 - 1.0
    if not abs(h2_res) <= H2_TOL:
        viol.append(("H2", "length sum", float(h2_res)))

    top = 1.0 + eps
    for i, th in enumerate((c.theta1, c.theta2, c.theta3, c.theta4), start=1):
        if not th > top:
            viol.append(("H3", f"theta{i}", float(th - top)))
    for i, th in ((5, c.theta5), (6, c.theta6)):
        if not 1.0 < th < top:
            viol.append(("H3", f"theta{i}", float(min(th - 1.0, top - th))))

    if math.isfinite(c.L4):
        segs = _segments_from_chain(c)
        raw_len = _raw_lengths(c)
        starts = (top, c.theta1, c.theta2, c.theta3, c.theta4, top, c.theta5, c.theta6, 1.0, -1.0)
        ends = (c.theta1, c.theta2, c.theta3, c.theta4, top, c.theta5, c.theta6, 1.0, -1.0, -top)
        for i, (y, L, s, e, (lo, hi)) in enumerate(zip(segs, raw_len, starts, ends, _bounds(eps)), 1):
            if not L > 0.0:
                viol.append(("H4", f"y{i}: nonpositive length", float(L)))
                viol.append(("H5", f"y{i}: nonpositive length", float(L)))
                continue
            for where, got, want in (("start", y.start, s), ("end", y.end, e)):
                if not abs(got - want) <= H4_TOL:
                    viol.append(("H4", f"y{i} {where}", float(got - want)))
            m, loc = _interior_margin(y, lo, hi, H4_TOL)
            if not m > 0.0:
                viol.append(("H5", f"y{i} {loc}", float(m)))
    else:
        viol.append(("H4", "L4 undefined", math.nan))
        viol.append(("H5", "L4 undefined", math.nan))

    flags = {h: not any(v[0] == h for v in viol) for h in ("H1", "H2", "H3", "H4", "H5")}
    return HypothesisReport(flags["H1"], flags["H2"], flags["H3"], flags["H4"], flags["H5"], tuple(viol))


def assemble_profile(pt: MapDomainPoint, *, force: bool = False,
                     fixed_point_tol: float = FIXED_POINT_TOL) -> PeriodicProfile:
    """Assemble p on [-1, -1+2*omega] from the pieces at ``pt``.

    Without ``force`` the point must lie in V, be a fixed point of F within
    ``fixed_point_tol`` and pass all hypotheses, and every join must be
    continuous to 1e-12. ``force`` skips these checks so that a deliberately
    wrong profile can be built as a negative control.
    """
    c = _chain_of(pt)
    if not force:
        if not pt.in_V:
            raise DomainError(
                f"orbit construction undefined: L4 <= 0 or L2 <= 0 (L2={pt.L2!r}, L4={float(c.L4)!r})"
            )
        if not abs(c.F - pt.L2) <= fixed_point_tol:
            raise CertificationError(f"not a fixed point: F - L2 = {c.F - pt.L2!r}")
        rep = check_hypotheses(pt)
        if not rep.all_ok:
            raise CertificationError(f"hypotheses violated: {rep.violations}")
    segs = _segments_from_chain(c)
    offs, t = [], -1.0
    for y in segs:
        offs.append(t)
        t += y.length
    half = c.omega
    offsets = tuple(offs + [o + half for o in offs])
    segments = tuple(segs + [y.negated() for y in segs])
    signs = (1,) * 10 + (-1,) * 10
    prof = PeriodicProfile(offsets, segments, signs, float(half), pt.eps, pt.K, pt.L2)
    if not force:
        for tj, dj in prof.joins():
            if dj > JOIN_TOL:
                raise CertificationError(f"discontinuous join at t={tj!r}: defect {dj!r}")
    return prof


def ode_residual_samples(params: FeedbackParams, profile: PeriodicProfile, n: int) -> float:
    """max |p'(t) + p(t) - f_K(p(t-1))| over ``n`` samples per piece, joins excluded."""
    worst = 0.0
    for off, seg in zip(profile.offsets, profile.segments):
        if seg.length == 0.0:
            continue
        s = seg.length * (np.arange(n) + 0.5) / n
        t = off + s
        lhs = seg.forcing(s)
        delayed = profile.evaluate(t - 1.0)
        worst = max(worst, float(np.max(np.abs(lhs - eval_feedback(params, delayed)))))
    return worst
