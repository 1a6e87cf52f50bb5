"""Command-line front end: ``dde-fold {k0,fold,sweep,orbit,verify,oracle}``.

Settings come from, in decreasing precedence, command-line flags, the JSON
file named by $DDE_FOLD_CONFIG, and built-in defaults. Files are written
atomically. Exit codes: 0 ok, 2 usage, 3 domain, 4 convergence,
5 certification failure.
"""
from __future__ import annotations

import argparse
import json
import os
import re
import sys
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import asymptotics
from ._io import atomic_write_text, csv_text, json_text
from .bifurcation import branch_point, locate_fold, sweep_branch
from .errors import CertificationError, ConvergenceError, DegreeOverflowError, DomainError
from .oracle import HistoryFunction, integrate, poincare_return, residual
from .orbit import assemble_profile, check_hypotheses
from .params import FeedbackParams
from .reduced_map import MapDomainPoint, derive_params, solve_K0

__all__ = ["main", "RunConfig", "build_parser", "EXIT_CODES", "CONFIG_ENV"]

CONFIG_ENV = "DDE_FOLD_CONFIG"
EXIT_CODES = {"ok": 0, "usage": 2, "domain": 3, "convergence": 4, "certification": 5}
COMMANDS = ("k0", "fold", "sweep", "orbit", "verify", "oracle")

DEFAULTS = {
    "eps": 1e-3,
    "k": None,
    "k_range": None,
    "branch": "lower",
    "out": None,
    "format": "csv",
    "density": 2000,
    "periods": 1,
    "jobs": 1,
    "domain": "U",
    "eps_grid": list(asymptotics.DEFAULT_EPS_GRID),
    "json": False,
    "tolerances": {"oracle_sup": 1e-8, "residual": 1e-10, "return_time": 1e-8},
}


@dataclass
class RunConfig:
    command: str
    eps: float = DEFAULTS["eps"]
    k: str | None = None
    k_range: str | None = None
    branch: str = "lower"
    out: str | None = None
    format: str = "csv"
    density: int = 2000
    periods: int = 1
    jobs: int = 1
    domain: str = "U"
    eps_grid: list = field(default_factory=lambda: list(DEFAULTS["eps_grid"]))
    json: bool = False
    tolerances: dict = field(default_factory=lambda: dict(DEFAULTS["tolerances"]))

    def validate(self) -> None:
        if self.command not in COMMANDS:
            raise _Usage(f"unknown command {self.command!r}")
        if not (0.0 < float(self.eps) < 1.0):
            raise _Usage(f"--eps must lie in (0, 1), got {self.eps!r}")
        if self.command == "sweep" and not self.k_range:
            raise _Usage("sweep needs --k-range LO:HI:N")
        if self.command in ("orbit", "oracle") and self.k is None:
            raise _Usage(f"{self.command} needs --k")
        if self.branch not in ("lower", "upper"):
            raise _Usage("--branch must be 'lower' or 'upper'")
        if self.format not in ("csv", "json"):
            raise _Usage("--format must be 'csv' or 'json'")
        if self.domain not in ("U", "V"):
            raise _Usage("--domain must be 'U' or 'V'")
        if int(self.density) < 2 or int(self.periods) < 1 or int(self.jobs) < 1:
            raise _Usage("--density >= 2, --periods >= 1 and --jobs >= 1 are required")


class _Usage(Exception):
    pass


_K_EXPR = re.compile(r"^\s*K\*\s*(?:([+-])\s*([0-9.eE+-]+))?\s*$")


class _KResolver:
    """Turns 'K*', 'K*+1e-4' or plain numbers into K values, locating the fold once."""

    def __init__(self, eps: float):
        self.eps = eps
        self._fold = None

    @property
    def fold(self):
        if self._fold is None:
            self._fold = locate_fold(self.eps)
        return self._fold

    def __call__(self, text) -> float:
        if isinstance(text, (int, float)):
            return float(text)
        m = _K_EXPR.match(str(text))
        if m:
            K = self.fold.K_star
            if m.group(1):
                step = float(m.group(2))
                K = K + step if m.group(1) == "+" else K - step
            return K
        try:
            return float(text)
        except ValueError:
            raise _Usage(f"cannot read K value {text!r}") from None


def _parse_range(text: str, resolve: _KResolver) -> tuple[float, float, int]:
    parts = str(text).split(":")
    if len(parts) != 3:
        raise _Usage(f"--k-range must be LO:HI:N, got {text!r}")
    try:
        n = int(parts[2])
    except ValueError:
        raise _Usage(f"--k-range count must be an integer, got {parts[2]!r}") from None
    return resolve(parts[0]), resolve(parts[1]), n


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dde-fold", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    S = argparse.SUPPRESS

    def common(sp, *names):
        sp.add_argument("--json", action="store_true", default=S, help="machine-readable stdout")
        if "eps" in names:
            sp.add_argument("--eps", type=float, default=S, help="ramp half-width (default 1e-3)")
        if "k" in names:
            sp.add_argument("--k", default=S, help="K value, or K*, K*+d, K*-d")
            sp.add_argument("--branch", choices=("lower", "upper"), default=S)
        if "out" in names:
            sp.add_argument("--out", default=S, help="output file")
            sp.add_argument("--format", choices=("csv", "json"), default=S)
        return sp

    common(sub.add_parser("k0", help="solve for K0"))
    common(sub.add_parser("fold", help="locate the fold (L2*, K*)"), "eps", "out")
    sw = common(sub.add_parser("sweep", help="fixed-point counts along K"), "eps", "out")
    sw.add_argument("--k-range", default=S, help="LO:HI:N, LO and HI may use K*")
    sw.add_argument("--jobs", type=int, default=S)
    sw.add_argument("--domain", choices=("U", "V"), default=S)
    ob = common(sub.add_parser("orbit", help="build and export a periodic profile"), "eps", "k", "out")
    ob.add_argument("--density", type=int, default=S, help="CSV samples per period")
    ve = common(sub.add_parser("verify", help="run the eps -> 0 limit battery"), "out")
    ve.add_argument("--eps-grid", type=lambda s: [float(v) for v in s.split(",")], default=S)
    orc = common(sub.add_parser("oracle", help="integrate a profile and compare"), "eps", "k", "out")
    orc.add_argument("--periods", type=int, default=S)
    orc.add_argument("--density", type=int, default=S)
    return p


def load_config(argv: Sequence[str] | None, environ=None) -> RunConfig:
    environ = os.environ if environ is None else environ
    ns = build_parser().parse_args(argv)
    merged = {k: v for k, v in DEFAULTS.items()}
    merged["tolerances"] = dict(DEFAULTS["tolerances"])
    path = environ.get(CONFIG_ENV)
    if path:
        try:
            with open(path, encoding="utf-8") as fh:
                conf = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise _Usage(f"cannot read config {path!r}: {exc}") from None
        if not isinstance(conf, dict):
            raise _Usage("config file must hold a JSON object")
        unknown = set(conf) - set(DEFAULTS)
        if unknown:
            raise _Usage(f"unknown config keys: {sorted(unknown)}")
        tol = conf.pop("tolerances", {})
        merged.update(conf)
        merged["tolerances"].update(tol)
    for k, v in vars(ns).items():
        merged[k.replace("-", "_")] = v
    cfg = RunConfig(**{k: v for k, v in merged.items() if k in RunConfig.__dataclass_fields__})
    cfg.eps = float(cfg.eps)
    cfg.validate()
    return cfg


# commands ------------------------------------------------------------------


def _emit(cfg: RunConfig, payload: dict, text: str) -> None:
    sys.stdout.write(json_text(payload) if cfg.json else text.rstrip("\n") + "\n")


def cmd_k0(cfg: RunConfig) -> int:
    r = solve_K0(full=True)
    payload = {"value": r.value, "residual": r.residual, "iterations": r.iterations, "bracket": list(r.bracket)}
    _emit(cfg, payload, f"K0 = {r.value:.17g}\nrelative residual = {r.residual:.3g}\n"
                        f"bracket = [{r.bracket[0]}, {r.bracket[1]}]\niterations = {r.iterations}")
    return 0 if r.residual <= 1e-12 else EXIT_CODES["certification"]


def cmd_fold(cfg: RunConfig) -> int:
    bp = locate_fold(cfg.eps, certify=False)
    d = bp.to_dict()
    if cfg.out:
        atomic_write_text(cfg.out, json_text(d) if cfg.format == "json" else
                          csv_text(list(k for k in d if k != "conditions"),
                                   [[d[k] for k in d if k != "conditions"]]))
    lines = [f"{k} = {v!r}" for k, v in d.items() if k != "conditions"]
    lines += [f"{k}: {'ok' if ok else 'FAILED'}" for k, ok in d["conditions"].items()]
    _emit(cfg, d, "\n".join(lines))
    return 0 if bp.certified() else EXIT_CODES["certification"]


def cmd_sweep(cfg: RunConfig) -> int:
    resolve = _KResolver(cfg.eps)
    lo, hi, n = _parse_range(cfg.k_range, resolve)
    pts = sweep_branch(cfg.eps, lo, hi, n, domain=cfg.domain, jobs=int(cfg.jobs))
    rows = []
    for bp in pts:
        fp = list(bp.fixed_points) + [float("nan")] * (2 - len(bp.fixed_points))
        rows.append([bp.K, len(bp.fixed_points), bp.classification, fp[0], fp[1], bp.max_excess])
    header = ["K", "count", "classification", "L2_lower", "L2_upper", "max_F_minus_L2"]
    data = {"eps": cfg.eps, "domain": cfg.domain, "points": [bp.to_dict() for bp in pts]}
    if cfg.out:
        atomic_write_text(cfg.out, csv_text(header, rows) if cfg.format == "csv" else json_text(data))
    text = "\n".join(f"K={r[0]:.12f} count={r[1]} {r[2]}" for r in rows)
    _emit(cfg, data, text)
    return 0


def _pick_root(cfg: RunConfig) -> MapDomainPoint:
    K = _KResolver(cfg.eps)(cfg.k)
    bp = branch_point(K, cfg.eps)
    if not bp.fixed_points:
        raise DomainError(f"no fixed point of F at K={K!r}, eps={cfg.eps!r}")
    L2 = bp.fixed_points[0] if cfg.branch == "lower" else bp.fixed_points[-1]
    return MapDomainPoint(L2, K, cfg.eps)


def cmd_orbit(cfg: RunConfig) -> int:
    pt = _pick_root(cfg)
    rep = check_hypotheses(pt)
    prof = assemble_profile(pt)
    params = FeedbackParams(pt.K, pt.eps)
    res = residual(params, prof)
    _, x = prof.sample(int(cfg.density))
    n_max, n_min = prof.extrema_counts()
    summary = {
        "K": pt.K, "eps": pt.eps, "L2": pt.L2, "branch": cfg.branch, "omega": prof.omega,
        "hypotheses": rep.to_dict(), "max_join_defect": prof.max_join_defect(), "dde_residual": res,
        "max_p": float(np.max(x)), "min_p": float(np.min(x)), "local_maxima": n_max, "local_minima": n_min,
    }
    if cfg.out:
        prof.write(cfg.out, cfg.format, int(cfg.density))
    ok = rep.all_ok and res <= cfg.tolerances["residual"] and n_max == 1 and n_min == 1
    _emit(cfg, summary, "\n".join(f"{k} = {v!r}" for k, v in summary.items()))
    return 0 if ok else EXIT_CODES["certification"]


def cmd_verify(cfg: RunConfig) -> int:
    checks = asymptotics.run_all(cfg.eps_grid)
    data = [c.to_dict() for c in checks]
    if cfg.out:
        atomic_write_text(cfg.out, json_text(data))
    _emit(cfg, {"checks": data}, asymptotics.report_table(checks))
    return 0 if all(c.passed for c in checks) else EXIT_CODES["certification"]


def cmd_oracle(cfg: RunConfig) -> int:
    pt = _pick_root(cfg)
    prof = assemble_profile(pt)
    params = FeedbackParams(pt.K, pt.eps)
    h = HistoryFunction.from_profile(prof)
    T = int(cfg.periods) * prof.period
    run = integrate(params, h, T)
    t = np.linspace(0.0, T, int(cfg.density) + 1)
    sup = float(np.max(np.abs(run.evaluate(t) - prof.evaluate(t))))
    t_ret, _ = poincare_return(params, h)
    summary = {
        "K": pt.K, "eps": pt.eps, "L2": pt.L2, "branch": cfg.branch, "periods": int(cfg.periods),
        "sup_difference": sup, "return_time": t_ret, "two_omega": prof.period,
        "events": len(run.events),
    }
    if cfg.out:
        atomic_write_text(cfg.out, run.to_csv(params, int(cfg.density)) if cfg.format == "csv" else
                          json_text({**summary, "event_log": json.loads(run.events_json())}))
    tol = cfg.tolerances
    ok = sup <= tol["oracle_sup"] and abs(t_ret - prof.period) <= tol["return_time"]
    _emit(cfg, summary, "\n".join(f"{k} = {v!r}" for k, v in summary.items()))
    return 0 if ok else EXIT_CODES["certification"]


_DISPATCH = {"k0": cmd_k0, "fold": cmd_fold, "sweep": cmd_sweep, "orbit": cmd_orbit,
             "verify": cmd_verify, "oracle": cmd_oracle}


def main(argv: Sequence[str] | None = None) -> int:
    try:
        cfg = load_config(argv)
    except SystemExit as exc:            # argparse usage errors
        return int(exc.code or 0)
    except _Usage as exc:
        print(f"dde-fold: error: {exc}", file=sys.stderr)
        return EXIT_CODES["usage"]
    try:
        return _DISPATCH[cfg.command](cfg)
    except _Usage as exc:
        print(f"dde-fold: error: {exc}", file=sys.stderr)
        return EXIT_CODES["usage"]
    except DomainError as exc:
        print(f"dde-fold: domain error: {exc}", file=sys.stderr)
        return EXIT_CODES["domain"]
    except (ConvergenceError, DegreeOverflowError) as exc:
        print(f"dde-fold: convergence error: {exc}", file=sys.stderr)
        return EXIT_CODES["convergence"]
    except CertificationError as exc:
        print(f"dde-fold: certification failed: {exc}", file=sys.stderr)
        return EXIT_CODES["certification"]


if __name__ == "__main__":
    sys.exit(main())
