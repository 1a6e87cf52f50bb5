"""Fixed points of F, the solve-for-K map phi, the fold locator and branch sweeps."""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .derivatives import MapJet, jet_from_chain
from .errors import CertificationError, ConvergenceError, DomainError
from .reduced_map import K_RANGE, F_array, L2_hat, _chain, check_domain
from .roots import newton_bisect

__all__ = [
    "BifurcationPoint",
    "BranchPoint",
    "solve_phi",
    "fold_function",
    "L2_hat_on_phi",
    "locate_fold",
    "sweep_branch",
    "branch_point",
    "FIXED_POINT_TOL",
    "TANGENT_TOL",
]

FIXED_POINT_TOL = 1e-12
FOLD_SLOPE_TOL = 1e-10
TANGENT_TOL = 1e-10
_MIN_SUBGRID = 10_000
_MAX_SUBGRID = 200_000
_SUBGRID_SPACING = 1e-9


def _jet(L2: float, K: float, eps: float) -> MapJet:
    return jet_from_chain(_chain(L2, K, eps))


def solve_phi(L2: float, eps: float, K_guess: float | None = None) -> float:
    """Return K in (6.5, 7) with F(L2, K, eps) = L2.

    Safeguarded Newton in K on the bracket (6.5, 7). Raises ConvergenceError
    ("no bracket") when F - L2 does not change sign there.
    """
    check_domain(L2, 6.87, eps)
    lo, hi = K_RANGE
    G = lambda K: float(_chain(L2, K, eps).F) - L2
    dG = lambda K: _jet(L2, K, eps).dF_dK
    K, _ = newton_bisect(G, dG, lo, hi, x0=K_guess, what=f"phi({L2!r})")
    return K


def fold_function(L2: float, eps: float, K_guess: float | None = None) -> tuple[float, float]:
    """g(L2) = dF/dL2(L2, phi(L2)) - 1, returned together with phi(L2)."""
    K = solve_phi(L2, eps, K_guess)
    return _jet(L2, K, eps).dF_dL2 - 1.0, K


def L2_hat_on_phi(eps: float, K_guess: float | None = None, maxiter: int = 50) -> tuple[float, float]:
    """Solve L = L2_hat(phi(L), eps) by fixed-point iteration; returns (L, phi(L)).

    L2_hat depends on K only weakly, so the iteration contracts fast.
    """
    K = solve_phi(0.0, eps, K_guess)
    L = L2_hat(K, eps)
    for _ in range(maxiter):
        K = solve_phi(L, eps, K)
        L_new = L2_hat(K, eps)
        if abs(L_new - L) <= 4e-16 * abs(L):
            return L_new, K
        L = L_new
    raise ConvergenceError("L2_hat(phi(L)) iteration did not settle")


@dataclass(frozen=True)
class BifurcationPoint:
    L2_star: float
    K_star: float
    eps: float
    F_residual: float
    dFdL2_minus_1: float
    dFdK: float
    d2FdL2sq: float
    L2_hat: float
    g_at_0: float = math.nan
    g_at_L2_hat: float = math.nan

    @property
    def sign_ratio(self) -> float:
        """d2F/dL2^2 over dF/dK; negative means fixed points exist for K >= K*."""
        return self.d2FdL2sq / self.dFdK

    def conditions(self) -> dict[str, bool]:
        return {
            "fixed_point": abs(self.F_residual) <= FIXED_POINT_TOL,
            "unit_slope": abs(self.dFdL2_minus_1) <= FOLD_SLOPE_TOL,
            "dFdK_positive": self.dFdK > 0.0,
            "d2FdL2sq_negative": self.d2FdL2sq < 0.0,
            "in_V": 0.0 < self.L2_star < self.L2_hat,
        }

    def certified(self) -> bool:
        return all(self.conditions().values())

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d["sign_ratio"] = self.sign_ratio
        d["conditions"] = self.conditions()
        return d


def locate_fold(eps: float, *, certify: bool = True) -> BifurcationPoint:
    """Find (L2*, K*) with F = L2 and dF/dL2 = 1 along K = phi(L2).

    g(L2) = dF/dL2(L2, phi(L2)) - 1 is positive at L2 = 0 and negative at the
    upper end of V for small eps; its zero is bracketed there and found with
    Brent's method. Raises ConvergenceError when g does not change sign (eps
    too large) and CertificationError when a fold condition fails.
    """
    check_domain(0.0, 6.87, eps)
    g0, K0 = fold_function(0.0, eps)
    Lh, Kh = L2_hat_on_phi(eps, K0)
    gh, _ = fold_function(Lh, eps, Kh)
    if not (g0 > 0.0 > gh):
        raise ConvergenceError(
            f"no sign change of g on (0, L2_hat): g(0)={g0!r}, g(L2_hat)={gh!r}; eps too large?"
        )
    state = {"K": K0}

    def g(L):
        val, state["K"] = fold_function(L, eps, state["K"])
        return val

    L_star = brentq(g, 0.0, Lh, xtol=1e-300, rtol=4.0 * np.finfo(float).eps, maxiter=200)
    K_star = solve_phi(L_star, eps, state["K"])
    j = _jet(L_star, K_star, eps)
    bp = BifurcationPoint(
        L2_star=float(L_star),
        K_star=float(K_star),
        eps=float(eps),
        F_residual=j.F - L_star,
        dFdL2_minus_1=j.dF_dL2 - 1.0,
        dFdK=j.dF_dK,
        d2FdL2sq=j.d2F_dL2sq,
        L2_hat=L2_hat(K_star, eps),
        g_at_0=g0,
        g_at_L2_hat=gh,
    )
    if certify and not bp.certified():
        failed = [k for k, ok in bp.conditions().items() if not ok]
        raise CertificationError(f"fold conditions failed: {failed}")
    return bp


@dataclass(frozen=True)
class BranchPoint:
    """Fixed points of F(., K, eps) found in the scanned interval.

    ``classification`` is "none", "fold" (one tangent root), "single" (one
    transversal root) or "pair". ``in_V`` flags which roots give a valid
    orbit construction (0 < L2 < L2_hat).
    """

    K: float
    fixed_points: tuple[float, ...]
    classification: str
    in_V: tuple[bool, ...] = ()
    max_excess: float = math.nan          # max of F - L2 over the scan
    argmax: float = math.nan
    tangent: tuple[bool, ...] = field(default=())

    def to_dict(self) -> dict:
        return {
            "K": self.K,
            "fixed_points": list(self.fixed_points),
            "classification": self.classification,
            "in_V": list(self.in_V),
            "max_excess": self.max_excess,
            "argmax": self.argmax,
        }


def _subgrid_size(width: float) -> int:
    return int(min(max(math.ceil(width / _SUBGRID_SPACING), _MIN_SUBGRID), _MAX_SUBGRID))


def branch_point(K: float, eps: float, *, domain: str = "U", n_sub: int | None = None) -> BranchPoint:
    """Scan F(., K, eps) - L2 over the chosen interval and polish every root.

    ``domain="U"`` scans (-eps, eps); ``domain="V"`` scans (0, L2_hat). The
    maximum of F - L2 is refined by Newton on dF/dL2 = 1, so a tangency is
    caught even when the grid straddles no sign change.
    """
    check_domain(0.0, K, eps)
    Lh = L2_hat(K, eps)
    if domain == "U":
        lo, hi = -eps * (1.0 - 1e-12), eps * (1.0 - 1e-12)
    elif domain == "V":
        lo, hi = Lh * 1e-12, Lh * (1.0 - 1e-12)
    else:
        raise DomainError(f"domain must be 'U' or 'V', got {domain!r}")
    n = _subgrid_size(hi - lo) if n_sub is None else int(n_sub)
    L = np.linspace(lo, hi, n)
    G = F_array(L, K, eps) - L
    Gs = lambda x: float(_chain(x, K, eps).F) - x

    i = int(np.argmax(G))
    L_max, G_max = float(L[i]), float(G[i])
    if 0 < i < n - 1:
        c = lambda x: _jet(x, K, eps).dF_dL2 - 1.0
        dc = lambda x: _jet(x, K, eps).d2F_dL2sq
        a, b = float(L[i - 1]), float(L[i + 1])
        if c(a) > 0.0 > c(b):
            L_max, _ = newton_bisect(c, dc, a, b, x0=L_max, what="maximiser of F - L2")
            G_max = Gs(L_max)

    if abs(G_max) <= TANGENT_TOL:
        roots = [L_max]
        tangent = [True]
    else:
        roots, tangent = [], []
        sgn = np.sign(G)
        for k in np.nonzero(sgn[:-1] * sgn[1:] < 0)[0]:
            r = brentq(Gs, float(L[k]), float(L[k + 1]), xtol=1e-300, rtol=4.0 * np.finfo(float).eps)
            roots.append(float(r))
            tangent.append(False)
        roots.extend(float(L[k]) for k in np.nonzero(G == 0.0)[0])
        tangent.extend(False for _ in range(len(roots) - len(tangent)))
    order = np.argsort(roots)
    roots = [roots[k] for k in order]
    tangent = [tangent[k] for k in order]
    for r in roots:
        if not abs(Gs(r)) <= FIXED_POINT_TOL:
            raise ConvergenceError(f"root at L2={r!r} not certified: |F - L2| = {abs(Gs(r))!r}")
    if tangent and tangent[0]:
        cls = "fold"
    else:
        cls = {0: "none", 1: "single", 2: "pair"}.get(len(roots), f"{len(roots)} roots")
    return BranchPoint(
        K=float(K),
        fixed_points=tuple(roots),
        classification=cls,
        in_V=tuple(0.0 < r < Lh for r in roots),
        max_excess=G_max,
        argmax=L_max,
        tangent=tuple(tangent),
    )


def sweep_branch(eps: float, K_lo: float, K_hi: float, n: int, *, domain: str = "U",
                 jobs: int = 1, n_sub: int | None = None) -> list[BranchPoint]:
    """Fixed points of F(., K, eps) for K on ``n`` equally spaced values in [K_lo, K_hi]."""
    if n < 2 or not (K_lo < K_hi):
        raise DomainError("sweep needs n >= 2 and K_lo < K_hi")
    if not (K_RANGE[0] < K_lo and K_hi < K_RANGE[1]):
        raise DomainError(f"[K_lo, K_hi] must lie inside (6.5, 7), got [{K_lo!r}, {K_hi!r}]")
    Ks = np.linspace(K_lo, K_hi, int(n))
    work = lambda K: branch_point(float(K), eps, domain=domain, n_sub=n_sub)
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(work, Ks))
    return [work(K) for K in Ks]
