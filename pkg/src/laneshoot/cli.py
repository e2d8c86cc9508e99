"""Command-line front end.

Commands
    classify   one shot: trajectory CSV + verdict JSON
    curve      trace eta(xi) on a complete profile
    band       trace [eta_m, eta_M] on an incomplete profile
    sweep      classify a (xi, eta) grid, CSV per cell
    verify     run one of the acceptance suites

Every invocation writes into a run directory keyed by the config hash, so
re-running the same config lands in the same place; sweeps resume by
skipping cells whose rows already exist. CSV bodies are deterministic
(timestamps live only in the run record).
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import verify as verify_mod
from .diagnostics import energy_ledger, flux_residual, pohozaev_scan
from .errors import LaneShootError
from .manifold import builtin_profile, summarize
from .shooting import IntegratorConfig, integrate_shot, make_exponents
from .solver import curve_trace, refine_boundaries, sweep_region

_ENV_OUT = "LANESHOOT_OUT"
_CSV_VERSION = "laneshoot-csv-1"


def _fmt(x) -> str:
    if isinstance(x, float):
        if math.isnan(x):
            return "nan"
        return format(x, ".17g")
    return str(x)


def _json_default(o):
    if isinstance(o, (np.bool_,)):
        return bool(o)
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    raise TypeError(f"not JSON serializable: {type(o)}")


def _dump_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True,
                               default=_json_default))


@dataclasses.dataclass
class ExperimentConfig:
    """Everything one command needs, round-trippable through JSON."""

    command: str
    family: str = "euclidean"
    n: int = 3
    curvature: float = 1.0
    alpha: float = 3.0
    p: float = 5.0
    q: float = 5.0
    xi: float = 1.0
    eta: float = 1.0
    xi_grid: tuple = (1.0, 2.0, 4.0)
    xi_range: tuple = (0.5, 2.0)
    eta_range: tuple = (0.5, 2.0)
    resolution: int = 32
    tol: float = 1e-6
    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    horizon: float | None = None
    threads: int = 1
    suite: str = "euclidean-exact"
    refine_boundary: bool = False

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["xi_grid"] = list(self.xi_grid)
        d["xi_range"] = list(self.xi_range)
        d["eta_range"] = list(self.eta_range)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config fields: {sorted(unknown)}")
        d = dict(d)
        for key in ("xi_grid", "xi_range", "eta_range"):
            if key in d:
                d[key] = tuple(float(x) for x in d[key])
        return cls(**d)

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:12]

    def validate(self):
        if self.n < 3:
            raise ValueError("dimension n must be >= 3")
        for name in ("p", "q", "xi", "eta", "tol", "rel_tol", "abs_tol"):
            if getattr(self, name) <= 0:
                raise ValueError(f"config field '{name}' must be positive")
        if self.horizon is not None and self.horizon <= 0:
            raise ValueError("horizon must be positive")
        if min(self.xi_range) <= 0 or min(self.eta_range) <= 0:
            raise ValueError("sweep ranges must be positive")
        if any(x <= 0 for x in self.xi_grid):
            raise ValueError("xi grid values must be positive")

    def profile(self):
        return builtin_profile(self.family, self.n, curvature=self.curvature,
                               alpha=self.alpha)

    def exponents(self):
        return make_exponents(self.p, self.q, self.n)

    def integrator(self) -> IntegratorConfig:
        return IntegratorConfig(rel_tol=self.rel_tol, abs_tol=self.abs_tol,
                                horizon=self.horizon)


def _run_dir(cfg: ExperimentConfig, out_root: str | None) -> Path:
    root = Path(out_root or os.environ.get(_ENV_OUT, "runs"))
    d = root / f"{cfg.command}-{cfg.digest()}"
    d.mkdir(parents=True, exist_ok=True)
    return d


def _write_csv(path: Path, meta: dict, header: list[str], rows) -> None:
    lines = [f"# {_CSV_VERSION}"]
    for k in sorted(meta):
        lines.append(f"# {k}={_fmt(meta[k])}")
    lines.append(",".join(header))
    for row in rows:
        lines.append(",".join(_fmt(x) for x in row))
    path.write_text("\n".join(lines) + "\n")


def _write_record(run_dir: Path, cfg: ExperimentConfig, artifacts: list[str],
                  verdicts: dict) -> None:
    record = {
        "config": cfg.to_dict(),
        "config_hash": cfg.digest(),
        "created_unix": time.time(),
        "artifacts": sorted(artifacts),
        "verdicts": verdicts,
    }
    _dump_json(run_dir / "run.json", record)


# ----------------------------------------------------------------------
# commands
# ----------------------------------------------------------------------

def cmd_classify(cfg: ExperimentConfig, out_root=None) -> int:
    cfg.validate()
    geom = summarize(cfg.profile(), cfg.exponents())
    exps = cfg.exponents()
    out = integrate_shot(geom, exps, cfg.xi, cfg.eta, cfg.integrator())
    traj = out.trajectory
    scan = pohozaev_scan(traj, geom, exps)
    n_scan = len(scan.r)
    cps = scan.r[np.unique(np.linspace(0, n_scan - 1, min(24, n_scan)).astype(int))]
    led = energy_ledger(traj, geom, exps, cps)
    led_of = dict(zip((float(c) for c in led.checkpoints),
                      zip(led.i_mixed, led.i_u, led.i_v)))

    run_dir = _run_dir(cfg, out_root)
    rows = []
    cum = (math.nan,) * 3
    for i, r in enumerate(scan.r):
        u, v, du, dv = (float(x) for x in traj.eval(float(r)))
        cum = led_of.get(float(r), cum)
        rows.append((float(r), u, v, du, dv,
                     float(scan.F[i]), float(scan.P[i]), float(scan.K[i]),
                     float(cum[0]), float(cum[1]), float(cum[2])))
    _write_csv(run_dir / "trajectory.csv",
               {"family": cfg.family, "n": cfg.n, "p": cfg.p, "q": cfg.q,
                "xi": cfg.xi, "eta": cfg.eta},
               ["r", "u", "v", "du", "dv", "F", "P", "K",
                "I_mixed", "I_u", "I_v"], rows)

    resid = flux_residual(traj, geom, exps)
    invariants = {
        "pohozaev_max": scan.max_p,
        "pohozaev_max_increment": scan.max_p_increment,
        "pohozaev_nonpositive": scan.max_p <= 1e-8,
        "pohozaev_monotone": scan.max_p_increment <= 1e-8,
        "flux_residual": resid,
        "flux_residual_ok": resid <= 1e-8,
        "identity_residual_energy": scan.energy_identity_residual,
        "identity_residual_pohozaev": scan.pohozaev_identity_residual,
        "energy_ledger_residual": led.max_residual,
        "energy_identities_ok": led.max_residual <= 1e-8,
    }
    verdict = {
        "outcome": out.kind.value,
        "zero_radius": out.zero_radius,
        "other_value": out.other_value,
        "horizon": out.horizon,
        "enclosure_u": None if out.enclosure_u is None else dataclasses.asdict(out.enclosure_u),
        "enclosure_v": None if out.enclosure_v is None else dataclasses.asdict(out.enclosure_v),
        "invariants": invariants,
    }
    _dump_json(run_dir / "verdict.json", verdict)
    ok = all(v for k, v in invariants.items() if k.endswith("_ok")
             or k.startswith("pohozaev_non") or k.startswith("pohozaev_mono"))
    _write_record(run_dir, cfg, ["trajectory.csv", "verdict.json"],
                  {"invariants_passed": bool(ok)})
    print(f"{out.kind.value}  ->  {run_dir}")
    return 0 if ok else 1


def cmd_curve(cfg: ExperimentConfig, out_root=None) -> int:
    return _trace(cfg, out_root, want_band=False)


def cmd_band(cfg: ExperimentConfig, out_root=None) -> int:
    return _trace(cfg, out_root, want_band=True)


def _trace(cfg: ExperimentConfig, out_root, want_band: bool) -> int:
    cfg.validate()
    exps = cfg.exponents()
    geom = summarize(cfg.profile(), exps)
    if want_band and not geom.incomplete:
        print("error: profile is stochastically complete; the existence set "
              "is a curve, use the curve command", file=sys.stderr)
        return 2
    if not want_band and geom.incomplete:
        print("error: profile is stochastically incomplete; the existence "
              "set is a band, use the band command", file=sys.stderr)
        return 2
    from .errors import MonotonicityViolation
    status = 0
    try:
        points = curve_trace(geom, exps, cfg.xi_grid, cfg.tol, cfg.integrator())
    except MonotonicityViolation as err:
        print(f"error: {err}", file=sys.stderr)
        return 1

    run_dir = _run_dir(cfg, out_root)
    meta = {"family": cfg.family, "n": cfg.n, "p": cfg.p, "q": cfg.q,
            "tol": cfg.tol}
    if want_band:
        rows = [(p.xi, p.eta_m, p.eta_M, p.width_m, p.width_M,
                 int(p.signature_ok), int(p.feasible)) for p in points]
        _write_csv(run_dir / "band.csv", meta,
                   ["xi", "eta_m", "eta_M", "width_m", "width_M",
                    "signature_ok", "feasible"], rows)
        blob = [{"xi": p.xi, "eta_m": p.eta_m, "eta_M": p.eta_M,
                 "width_m": p.width_m, "width_M": p.width_M,
                 "signature_ok": p.signature_ok, "feasible": p.feasible,
                 "witness_outcomes": [p.witness_m.kind.value,
                                      p.witness_mid.kind.value,
                                      p.witness_M.kind.value]}
                for p in points]
        artifacts = ["band.csv", "points.json"]
        if not all(p.signature_ok and p.feasible for p in points):
            status = 1
    else:
        rows = [(p.xi, p.eta, p.bracket_width, p.horizon,
                 p.witness.kind.value) for p in points]
        _write_csv(run_dir / "curve.csv", meta,
                   ["xi", "eta", "bracket_width", "horizon", "witness"], rows)
        blob = [{"xi": p.xi, "eta": p.eta, "bracket_width": p.bracket_width,
                 "horizon": p.horizon, "witness": p.witness.kind.value}
                for p in points]
        artifacts = ["curve.csv", "points.json"]
    _dump_json(run_dir / "points.json", blob)
    _write_record(run_dir, cfg, artifacts, {"points": len(points),
                                            "exit": status})
    print(f"{len(points)} points  ->  {run_dir}")
    return status


def cmd_sweep(cfg: ExperimentConfig, out_root=None) -> int:
    cfg.validate()
    exps = cfg.exponents()
    geom = summarize(cfg.profile(), exps)
    run_dir = _run_dir(cfg, out_root)
    cells_path = run_dir / "cells.csv"
    if cells_path.exists():
        done = _read_done_cells(cells_path)
        expected = cfg.resolution * cfg.resolution
        if len(done) >= expected:
            print(f"sweep already complete  ->  {run_dir}")
            return 0
    region = sweep_region(geom, exps, cfg.xi_range, cfg.eta_range,
                          cfg.resolution, cfg.integrator(),
                          workers=max(1, cfg.threads))
    rows = []
    for i, xi in enumerate(region.xis):
        for j, eta in enumerate(region.etas):
            rows.append((float(xi), float(eta), region.classes[i, j],
                         float(region.horizons[i, j]), region.status[i, j],
                         float(region.enc_lo_u[i, j]), float(region.enc_up_u[i, j]),
                         float(region.enc_lo_v[i, j]), float(region.enc_up_v[i, j])))
    _write_csv(cells_path,
               {"family": cfg.family, "n": cfg.n, "p": cfg.p, "q": cfg.q,
                "resolution": cfg.resolution},
               ["xi", "eta", "class", "survival_radius", "status",
                "enc_lo_u", "enc_up_u", "enc_lo_v", "enc_up_v"], rows)
    artifacts = ["cells.csv"]
    if cfg.refine_boundary:
        refined = refine_boundaries(region, geom, exps, cfg.integrator())
        _write_csv(run_dir / "boundaries.csv", {"resolution": cfg.resolution},
                   ["xi", "eta_low", "eta_high", "class_below", "class_above"],
                   refined)
        artifacts.append("boundaries.csv")
    failures = int(np.sum(region.classes == "!"))
    _write_record(run_dir, cfg, artifacts, {"cell_failures": failures})
    print(f"{len(rows)} cells ({failures} failures)  ->  {run_dir}")
    return 0 if failures == 0 else 1


def _read_done_cells(path: Path) -> set:
    done = set()
    for line in path.read_text().splitlines():
        if line.startswith("#") or line.startswith("xi,"):
            continue
        parts = line.split(",")
        if len(parts) > 2:
            done.add((parts[0], parts[1]))
    return done


def cmd_verify(cfg: ExperimentConfig, out_root=None) -> int:
    if cfg.suite not in verify_mod.SUITES:
        print(f"error: unknown suite '{cfg.suite}'; choose from "
              f"{', '.join(sorted(verify_mod.SUITES))}", file=sys.stderr)
        return 2
    results = verify_mod.run_suite(cfg.suite)
    run_dir = _run_dir(cfg, out_root)
    report = []
    for res in results:
        print(res.line())
        report.append({"criterion": res.criterion, "name": res.name,
                       "passed": res.passed, "detail": res.detail})
    _dump_json(run_dir / "report.json", report)
    passed = all(r.passed for r in results)
    _write_record(run_dir, cfg, ["report.json"],
                  {"passed": sum(r.passed for r in results),
                   "failed": sum(not r.passed for r in results)})
    return 0 if passed else 1


# ----------------------------------------------------------------------
# argument parsing
# ----------------------------------------------------------------------

def _add_common(sub):
    sub.add_argument("--config", type=str, default=None,
                     help="JSON config file; flags override its fields")
    sub.add_argument("--out", type=str, default=None,
                     help=f"output root (default $" + _ENV_OUT + " or ./runs)")
    sub.add_argument("--profile", dest="family", type=str, default=None,
                     choices=["euclidean", "hyperbolic", "exp_power"])
    sub.add_argument("--n", type=int, default=None)
    sub.add_argument("--curvature", type=float, default=None)
    sub.add_argument("--alpha", type=float, default=None)
    sub.add_argument("--p", type=float, default=None)
    sub.add_argument("--q", type=float, default=None)
    sub.add_argument("--rel-tol", dest="rel_tol", type=float, default=None)
    sub.add_argument("--abs-tol", dest="abs_tol", type=float, default=None)
    sub.add_argument("--horizon", type=float, default=None)
    sub.add_argument("--threads", type=int, default=None)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="laneshoot",
        description="Radial shooting laboratory for the Lane-Emden system "
                    "on rotationally symmetric model manifolds")
    sp = ap.add_subparsers(dest="command", required=True)

    c = sp.add_parser("classify", help="integrate and classify one shot")
    _add_common(c)
    c.add_argument("--xi", type=float, default=None)
    c.add_argument("--eta", type=float, default=None)

    for name, help_ in (("curve", "trace eta(xi) on a complete profile"),
                        ("band", "trace the existence band on an incomplete profile")):
        t = sp.add_parser(name, help=help_)
        _add_common(t)
        t.add_argument("--xi-grid", dest="xi_grid", type=str, default=None,
                       help="comma-separated strictly increasing xi values")
        t.add_argument("--tol", type=float, default=None)

    s = sp.add_parser("sweep", help="classify a (xi, eta) grid")
    _add_common(s)
    s.add_argument("--xi-range", dest="xi_range", type=str, default=None,
                   help="lo,hi")
    s.add_argument("--eta-range", dest="eta_range", type=str, default=None,
                   help="lo,hi")
    s.add_argument("--resolution", type=int, default=None)
    s.add_argument("--refine-boundary", dest="refine_boundary",
                   action="store_true", default=None)

    v = sp.add_parser("verify", help="run an acceptance suite")
    _add_common(v)
    v.add_argument("suite", nargs="?", default=None,
                   help=f"one of: {', '.join(sorted(verify_mod.SUITES))}")
    return ap


def _config_from_args(args) -> ExperimentConfig:
    base = {}
    if args.config:
        base = json.loads(Path(args.config).read_text())
    base["command"] = args.command
    for field in ("family", "n", "curvature", "alpha", "p", "q", "xi", "eta",
                  "rel_tol", "abs_tol", "horizon", "threads", "tol",
                  "resolution", "suite", "refine_boundary"):
        val = getattr(args, field, None)
        if val is not None:
            base[field] = val
    for field in ("xi_grid", "xi_range", "eta_range"):
        val = getattr(args, field, None)
        if isinstance(val, str):
            base[field] = tuple(float(x) for x in val.split(","))
        elif val is not None:
            base[field] = val
    return ExperimentConfig.from_dict(base)


_COMMANDS = {
    "classify": cmd_classify,
    "curve": cmd_curve,
    "band": cmd_band,
    "sweep": cmd_sweep,
    "verify": cmd_verify,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _config_from_args(args)
        cfg.validate()
    except (ValueError, json.JSONDecodeError) as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2
    try:
        return _COMMANDS[args.command](cfg, out_root=args.out)
    except LaneShootError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
