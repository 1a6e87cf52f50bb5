"""Method-of-steps integrator for x'(t) = -x(t) + f_K(x(t-1)) with exact propagation.

f_K is affine on each of its five branches, so on any interval where the
delayed value x(t-1) stays in one branch the equation reads
x' = -x + A + B y(t-1) with y an exponential-polynomial piece. Its solution
is again an exponential polynomial whose coefficients follow in closed form
(the polynomial degree grows by one on the ramps, stays put otherwise).
Only the branch-switch times are computed numerically, by root finding.

All times are offsets from the start of the integration, so the history
lives on [-1, 0].
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from ._io import atomic_write_text, csv_text, json_text
from .errors import ConvergenceError, DegreeOverflowError, DomainError, EventClusterWarning
from .orbit import PeriodicProfile, ode_residual_samples
from .params import FeedbackParams, eval_feedback
from .roots import newton_bisect
from .segments import ExpPolySegment

__all__ = [
    "HistoryFunction",
    "Event",
    "IntegrationResult",
    "integrate",
    "residual",
    "poincare_return",
    "MAX_DEGREE",
    "CLUSTER_TOL",
]

MAX_DEGREE = 12
CLUSTER_TOL = 1e-13
_TILE_TOL = 1e-14
_JOIN_TOL = 1e-10


def _eval_pieces(pieces: Sequence[tuple[float, ExpPolySegment]], starts: list[float], t: float) -> float:
    import bisect

    i = bisect.bisect_right(starts, t) - 1
    i = min(max(i, 0), len(pieces) - 1)
    off, seg = pieces[i]
    return seg.value(min(max(t - off, 0.0), seg.length))


@dataclass(frozen=True)
class HistoryFunction:
    """Initial segment on [t0 - 1, t0], stored with offsets relative to t0."""

    pieces: tuple[tuple[float, ExpPolySegment], ...]
    t0: float = 0.0

    def __post_init__(self):
        pieces = tuple((float(o), s) for o, s in self.pieces if s.length > 0.0)
        if not pieces:
            raise DomainError("history needs at least one piece of positive length")
        object.__setattr__(self, "pieces", pieces)
        if abs(pieces[0][0] + 1.0) > _TILE_TOL:
            raise DomainError(f"history must start at -1, starts at {pieces[0][0]!r}")
        for (o1, s1), (o2, s2) in zip(pieces[:-1], pieces[1:]):
            if abs(o1 + s1.length - o2) > _TILE_TOL:
                raise DomainError(f"gap or overlap in history at {o2!r}")
            if abs(s1.end - s2.start) > _JOIN_TOL:
                raise DomainError(f"history discontinuous at {o2!r}: {s1.end!r} vs {s2.start!r}")
        o, s = pieces[-1]
        if abs(o + s.length) > _TILE_TOL:
            raise DomainError(f"history must end at 0, ends at {o + s.length!r}")

    @classmethod
    def constant(cls, value: float, t0: float = 0.0) -> "HistoryFunction":
        return cls(((-1.0, ExpPolySegment(1.0, float(value), (float(value),))),), t0)

    @classmethod
    def from_profile(cls, profile: PeriodicProfile, t0: float = 0.0) -> "HistoryFunction":
        """The segment of ``profile`` on [t0 - 1, t0]."""
        return cls(tuple(profile.history_pieces(t0)), t0)

    def evaluate(self, s):
        starts = [o for o, _ in self.pieces]
        if np.ndim(s):
            return np.array([_eval_pieces(self.pieces, starts, float(v)) for v in np.ravel(s)]).reshape(np.shape(s))
        return _eval_pieces(self.pieces, starts, float(s))

    __call__ = evaluate

    def perturbed(self, bump) -> "HistoryFunction":
        """Add ``bump`` (a sequence aligned with ``pieces`` of (c0, d) additions) piece by piece."""
        out = []
        for (o, s), (dc, dd) in zip(self.pieces, bump):
            d = list(s.d) + [0.0] * max(0, len(dd) - len(s.d))
            for k, v in enumerate(dd):
                d[k] += v
            out.append((o, ExpPolySegment(s.length, s.c0 + dc, tuple(d))))
        return HistoryFunction(tuple(out), self.t0)


@dataclass(frozen=True)
class Event:
    """The delayed value x(t-1) crossed ``threshold`` at time ``time``."""

    time: float
    threshold: float
    direction: int
    clustered: bool = False


@dataclass(frozen=True)
class IntegrationResult:
    trajectory: tuple[tuple[float, ExpPolySegment], ...]
    events: tuple[Event, ...]
    final_history: HistoryFunction
    history: HistoryFunction

    def evaluate(self, t):
        """Solution at times in [-1, T] (history included)."""
        pieces = list(self.history.pieces) + list(self.trajectory)
        starts = [o for o, _ in pieces]
        if np.ndim(t):
            return np.array([_eval_pieces(pieces, starts, float(v)) for v in np.ravel(t)]).reshape(np.shape(t))
        return _eval_pieces(pieces, starts, float(t))

    @property
    def T(self) -> float:
        o, s = self.trajectory[-1]
        return o + s.length

    def to_csv(self, params: FeedbackParams, n: int = 2000) -> str:
        t = self.T * np.arange(n + 1) / n
        x = self.evaluate(t)
        xd = self.evaluate(t - 1.0)
        return csv_text(("t", "x", "x_delayed", "f_delayed"), zip(t, x, xd, eval_feedback(params, xd)))

    def events_json(self) -> str:
        return json_text([
            {"time": e.time, "threshold": e.threshold, "direction": e.direction, "clustered": e.clustered}
            for e in self.events
        ])


def _branch(v: float, eps: float) -> int:
    if v <= -1.0 - eps:
        return 0
    if v < -1.0:
        return 1
    if v <= 1.0:
        return 2
    if v < 1.0 + eps:
        return 3
    return 4


def _affine(branch: int, K: float, eps: float) -> tuple[float, float]:
    r = K / eps
    return ((-K, 0.0), (r, r), (0.0, 0.0), (-r, r), (K, 0.0))[branch]


def _propagate(x0: float, A: float, B: float, y: ExpPolySegment) -> ExpPolySegment:
    """Exact solution of x' = -x + A + B y(t) on [0, y.length] with x(0) = x0."""
    if B == 0.0:
        return ExpPolySegment(y.length, A, (x0,))
    m = y.degree
    if m + 1 > MAX_DEGREE:
        raise DegreeOverflowError(f"degree overflow: exact propagation needs degree {m + 1} > {MAX_DEGREE}")
    d = [x0] + [A / math.factorial(k) + B * y.d[k - 1] / k for k in range(1, m + 2)]
    return ExpPolySegment(y.length, A + B * y.c0, tuple(d))


class _Stepper:
    def __init__(self, params: FeedbackParams, h: HistoryFunction):
        self.K, self.eps = params.K, params.eps
        self.thresholds = (-1.0 - self.eps, -1.0, 1.0, 1.0 + self.eps)
        self.pieces: list[tuple[float, ExpPolySegment]] = list(h.pieces)
        self.n_hist = len(self.pieces)
        self.t = 0.0
        self.x = self.pieces[-1][1].end
        self.j = 0          # index of the piece currently driving
        self.u = 0.0        # local time inside that piece
        self.branch: int | None = None
        self.events: list[Event] = []

    def _splits(self, seg: ExpPolySegment, u0: float) -> tuple[list[float], bool]:
        cuts = []
        for lev in self.thresholds:
            cuts.extend(seg.level_crossings(lev, u0, seg.length))
        cuts.sort()
        merged, clustered = [], False
        for c in cuts:
            if c - u0 <= CLUSTER_TOL or seg.length - c <= CLUSTER_TOL:
                continue
            if merged and c - merged[-1] <= CLUSTER_TOL:
                clustered = True
                continue
            merged.append(c)
        if clustered:
            warnings.warn("threshold crossings closer than 1e-13 were merged", EventClusterWarning, stacklevel=4)
        return [u0, *merged, seg.length], clustered

    def _record(self, new: int, t: float, clustered: bool) -> None:
        old = self.branch
        if old is not None and new != old:
            step = 1 if new > old else -1
            for b in range(old, new, step):
                thr = self.thresholds[b if step > 0 else b - 1]
                self.events.append(Event(t, thr, step, clustered))
        self.branch = new

    def advance(self, T: float) -> None:
        """Extend the solution to time T."""
        while self.t < T - 1e-15:
            off, seg = self.pieces[self.j]
            if seg.length - self.u <= 0.0:
                self.j += 1
                self.u = 0.0
                continue
            cuts, clustered = self._splits(seg, self.u)
            for ua, ub in zip(cuts[:-1], cuts[1:]):
                ub = min(ub, ua + (T - self.t))
                if ub <= ua:
                    break
                b = _branch(seg.value(0.5 * (ua + ub)), self.eps)
                self._record(b, self.t, clustered)
                A, B = _affine(b, self.K, self.eps)
                new = _propagate(self.x, A, B, seg.restrict(ua, ub))
                self.pieces.append((self.t, new))
                self.t = off + 1.0 + ub
                self.x = new.end
                self.u = ub
                if self.t >= T - 1e-15:
                    break
            if self.u >= seg.length:
                self.j += 1
                self.u = 0.0

    def window(self, t_end: float) -> HistoryFunction:
        """History on [t_end - 1, t_end], re-anchored so that t_end maps to 0."""
        lo = t_end - 1.0
        out = []
        for off, seg in self.pieces:
            a, b = max(off, lo), min(off + seg.length, t_end)
            if b - a > 0.0:
                out.append((a - t_end, seg.restrict(a - off, b - off)))
        if out:
            # absorb roundoff in the tiling
            o, s = out[0]
            out[0] = (-1.0, s.with_length(s.length + (o + 1.0)))
            o, s = out[-1]
            out[-1] = (o, s.with_length(-o))
        return HistoryFunction(tuple(out))

    def result(self, h: HistoryFunction, T: float) -> IntegrationResult:
        traj = tuple(self.pieces[self.n_hist:])
        return IntegrationResult(traj, tuple(self.events), self.window(T), h)


def integrate(params: FeedbackParams, h: HistoryFunction, T: float) -> IntegrationResult:
    """Advance the solution with history ``h`` by time ``T`` > 0."""
    if not T > 0.0:
        raise DomainError(f"T must be positive, got {T!r}")
    st = _Stepper(params, h)
    st.advance(T)
    return st.result(h, T)


def residual(params: FeedbackParams, profile: PeriodicProfile, n_samples: int = 50) -> float:
    """Largest defect of ``profile`` as a solution of the delay equation.

    This is the maximum of two quantities: |p' + p - f_K(p(t-1))| sampled at
    ``n_samples`` interior points of every piece, and the jump of p at every
    join. Between joins each piece solves its linear ODE exactly, so for a
    profile built from a non-fixed point the defect shows up as a jump.
    """
    return max(ode_residual_samples(params, profile, n_samples), profile.max_join_defect())


def _first_upcrossing(pieces, level: float, s_min: float):
    """First time after ``s_min`` where x - level goes from negative to positive.

    Touching the level from below and turning back (as at a join that ends
    exactly on the level) is not a crossing; the sign must become positive.
    """
    below = None        # (piece index, local time) of the last negative sample
    for i, (off, seg) in enumerate(pieces):
        if off + seg.length <= s_min:
            continue
        u0 = max(s_min - off, 0.0)
        pts = [u0] + [c for c in seg.critical_points() if c > u0] + [seg.length]
        for k, u in enumerate(pts):
            f = seg.value(u) - level
            if f < 0.0:
                below = (i, k, u)
            elif f > 0.0 and below is not None:
                bi, bk, bu = below
                if bi == i and bk == k - 1:
                    r, _ = newton_bisect(lambda z: seg.value(z) - level, seg.derivative, bu, u,
                                         what="section crossing")
                    return off + r
                # the sign change straddles a join: the crossing is the join itself
                return off + (pts[0] if bi != i else bu)
    return None


def poincare_return(params: FeedbackParams, h: HistoryFunction, T_max: float = 4.0):
    """Return time and history at the next upward crossing of x(t-1) through 1 + eps.

    The section is {phi : phi(-1) = 1 + eps}. Raises ConvergenceError if no
    return happens before ``T_max``.
    """
    level = 1.0 + params.eps
    st = _Stepper(params, h)
    T = 0.0
    while T < T_max:
        T = min(T + 1.0, T_max)
        st.advance(T)
        s = _first_upcrossing(st.pieces, level, -1.0 + 1e-9)
        if s is not None and s + 1.0 <= T:
            t_ret = s + 1.0
            return t_ret, st.window(t_ret)
    raise ConvergenceError(f"no return within T_max={T_max!r}")
