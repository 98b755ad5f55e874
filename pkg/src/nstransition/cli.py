"""Command-line front end.

Exit codes: 0 success, 2 user or configuration error, 3 solver or runtime
failure.
"""

from __future__ import annotations

import argparse
import csv
import glob
import hashlib
import io
import json
import math
import os
import sys
import warnings
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .errors import (
    BlowUpError,
    ConfigError,
    CorruptFileError,
    DegenerateDesignError,
    DomainError,
    FieldValidationError,
    InsufficientDataError,
    ShapeError,
    SnapshotFormatError,
    UndefinedReferenceError,
)
from .field_core import FlowParams, snapshot_read, snapshot_write
from .leray_diagnostics import diagnose_timeline
from .spectral_solver import SolverConfig, Timeline, simulate
from .transition_scaling import (
    SweepConfig,
    powerlaw_fit,
    reynolds_sweep,
    sweep_fit_points,
    synth_sk_dataset,
)

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 2, 3

DIAGNOSE_COLUMNS = ["time", "kinetic_energy", "h1_norm_sq", "identity_residual_raw",
                    "identity_residual_normalized", "critical_fraction",
                    "singularity_indicator", "regime_label"]
SWEEP_COLUMNS = ["re", "nu", "t_trans", "tau_trans", "hit"]


class UsageError(Exception):
    pass


class RuntimeFailure(Exception):
    pass


def config_digest(doc):
    canonical = json.dumps(doc, sort_keys=True, separators=(",", ":"), allow_nan=False)
    return hashlib.sha256(canonical.encode()).hexdigest()


def _now():
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


@dataclass
class RunManifest:
    command: str
    config_digest: str
    tool_version: str = __version__
    start_time: str = field(default_factory=_now)
    end_time: str = None
    outputs: list = field(default_factory=list)
    status: str = "ok"
    failure_time: float = None

    def write(self, out_dir):
        self.end_time = _now()
        doc = {"command": self.command, "config_digest": self.config_digest,
               "tool_version": self.tool_version, "start_time": self.start_time,
               "end_time": self.end_time, "outputs": sorted(self.outputs),
               "status": self.status}
        if self.failure_time is not None:
            doc["failure_time"] = self.failure_time
        (Path(out_dir) / "manifest.json").write_text(json.dumps(doc, indent=2) + "\n")


def _fmt(x):
    if x is None:
        return ""
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, float):
        return "" if math.isnan(x) else repr(float(x))
    return str(x)


def _csv_text(columns, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def _say(args, msg):
    if not args.quiet:
        print(msg, file=sys.stderr)


def _warn(msg):
    print(f"warning: {msg}", file=sys.stderr)


def _apply_seed(config, seed):
    if seed is None or config.initial_condition.kind != "random_shear":
        return config
    from dataclasses import replace
    return replace(config, initial_condition=replace(config.initial_condition, seed=seed))


def _load_solver_config(path, seed):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc.strerror}") from None
    try:
        return _apply_seed(SolverConfig.from_json(text), seed)
    except ConfigError as exc:
        raise UsageError(f"{path}: {exc}") from None


def cmd_simulate(args):
    config = _load_solver_config(args.config, args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    manifest = RunManifest("simulate", config_digest(config.to_dict()))
    try:
        timeline = simulate(config)
    except BlowUpError as exc:
        timeline = exc.timeline
        manifest.status = "failed"
        manifest.failure_time = exc.time
    except (ShapeError, SnapshotFormatError, CorruptFileError, FieldValidationError, OSError) as exc:
        raise UsageError(f"initial condition: {exc}") from None
    for k, snap in enumerate(timeline.snapshots if timeline else ()):
        name = f"snap_{k:06d}.bin"
        snapshot_write(snap, out / name)
        manifest.outputs.append(name)
    manifest.write(out)
    if manifest.status != "ok":
        raise RuntimeFailure(f"solver blew up at t={manifest.failure_time}; "
                             f"{len(manifest.outputs)} snapshots kept in {out}")
    _say(args, f"wrote {len(manifest.outputs)} snapshots to {out}")
    return EXIT_OK


def _snapshot_paths(spec):
    p = Path(spec)
    if p.is_dir():
        paths = sorted(p.glob("snap_*.bin")) or sorted(p.glob("*.bin"))
    else:
        paths = sorted(Path(x) for x in glob.glob(spec))
    if not paths:
        raise UsageError(f"no snapshot files matched {spec!r}")
    return paths


def _load_params(path):
    try:
        doc = json.loads(Path(path).read_text())
    except OSError as exc:
        raise UsageError(f"cannot read params {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from None
    if isinstance(doc, dict) and "params" in doc and "grid" in doc:
        try:
            return SolverConfig.from_dict(doc).params
        except ConfigError as exc:
            raise UsageError(f"{path}: {exc}") from None
    allowed = {"nu", "rho", "g", "u_char", "l_char"}
    if not isinstance(doc, dict) or "nu" not in doc:
        raise UsageError(f"{path}: params must be an object with at least 'nu'")
    unknown = set(doc) - allowed
    if unknown:
        raise UsageError(f"{path}: unknown key {sorted(unknown)[0]!r}")
    try:
        return FlowParams(**doc)
    except (DomainError, TypeError, ValueError) as exc:
        raise UsageError(f"{path}: {exc}") from None


def _load_timeline(args):
    params = _load_params(args.params)
    snaps = []
    for path in _snapshot_paths(args.snapshots):
        try:
            snaps.append(snapshot_read(path))
        except (SnapshotFormatError, CorruptFileError, FieldValidationError) as exc:
            raise UsageError(str(exc)) from None
    snaps.sort(key=lambda s: s.time)
    try:
        return Timeline(snaps, params)
    except (ShapeError, FieldValidationError) as exc:
        raise UsageError(f"inconsistent snapshots: {exc}") from None


def _diagnose_records(args):
    timeline = _load_timeline(args)
    try:
        return diagnose_timeline(timeline, theta=args.theta, critical_tol=args.critical_tol)
    except UndefinedReferenceError as exc:
        raise UsageError(str(exc)) from None


def _diagnose_csv(records):
    rows = [(r.time, r.kinetic_energy, r.h1_norm_sq, r.identity_residual,
             r.identity_residual_normalized, r.critical_fraction, r.singularity_indicator,
             r.regime_label.value) for r in records]
    return _csv_text(DIAGNOSE_COLUMNS, rows)


def cmd_diagnose(args):
    text = _diagnose_csv(_diagnose_records(args))
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_report(args):
    from .plots import regime_strip_chart

    records = _diagnose_records(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    digest = config_digest({"snapshots": [str(p) for p in _snapshot_paths(args.snapshots)],
                            "params": json.loads(Path(args.params).read_text()),
                            "theta": args.theta, "critical_tol": args.critical_tol})
    manifest = RunManifest("report", digest)
    (out / "diagnostics.csv").write_text(_diagnose_csv(records))
    regime_strip_chart(records, out / "regimes.svg", timestamp=not args.no_timestamp)
    manifest.outputs += ["diagnostics.csv", "regimes.svg"]
    manifest.write(out)
    _say(args, f"wrote report to {out}")
    return EXIT_OK


def cmd_sweep(args):
    from .plots import sweep_figure

    try:
        sweep = SweepConfig.load(args.config)
    except OSError as exc:
        raise UsageError(f"cannot read config {args.config}: {exc.strerror}") from None
    except ConfigError as exc:
        raise UsageError(f"{args.config}: {exc}") from None
    if args.seed is not None:
        from dataclasses import replace
        sweep = replace(sweep, template=_apply_seed(sweep.template, args.seed))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    manifest = RunManifest("sweep", config_digest(sweep.to_dict()))
    rows = reynolds_sweep(sweep, jobs=args.jobs)
    (out / "sweep.csv").write_text(
        _csv_text(SWEEP_COLUMNS, [(r.re, r.nu, r.t_trans, r.tau_trans, r.hit) for r in rows]))
    manifest.outputs.append("sweep.csv")
    for r in rows:
        if not math.isnan(r.failure_time):
            _warn(f"run at Re={r.re!r} blew up at t={r.failure_time!r}")
    points = sweep_fit_points(rows, sweep.fit_against)
    fit = None
    if len(points) < 2:
        _warn(f"only {len(points)} successful run(s); fit skipped")
    else:
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RuntimeWarning)
                fit = powerlaw_fit(points)
        except DegenerateDesignError as exc:
            _warn(f"fit skipped: {exc}")
        else:
            if fit.low_count:
                _warn(f"fit uses only {fit.n_points} points")
            (out / "fit.json").write_text(fit.to_json() + "\n")
            manifest.outputs.append("fit.json")
    sweep_figure(points, fit, out / "sweep.svg", sweep.fit_against, timestamp=not args.no_timestamp)
    manifest.outputs.append("sweep.svg")
    if not any(r.hit for r in rows) and all(not math.isnan(r.failure_time) for r in rows):
        manifest.status = "failed"
        manifest.write(out)
        raise RuntimeFailure("all sweep runs failed")
    manifest.write(out)
    if fit is not None:
        _say(args, f"exponent {fit.exponent:.4f}, k1 {fit.prefactor_k1:.4g}, R^2 {fit.r_squared:.6f}")
    return EXIT_OK


def read_fit_csv(path):
    """(re, tau_trans) pairs from a sweep-style CSV; non-hit rows skipped."""
    try:
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or not {"re", "tau_trans"} <= set(reader.fieldnames):
                raise UsageError(f"{path}: CSV needs 're' and 'tau_trans' columns")
            points = []
            for lineno, row in enumerate(reader, start=2):
                hit = (row.get("hit") or "true").strip().lower()
                if hit in ("false", "0", "no"):
                    continue
                try:
                    re_, tau = float(row["re"]), float(row["tau_trans"])
                except (TypeError, ValueError):
                    raise UsageError(f"{path}:{lineno}: non-numeric re/tau_trans") from None
                points.append((re_, tau))
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None
    return points


def cmd_fit(args):
    if args.synth:
        seed = 0 if args.seed is None else args.seed
        re_values = np.geomspace(args.re_min, args.re_max, args.n)
        try:
            points = synth_sk_dataset(args.k1, args.noise, re_values, seed)
        except DomainError as exc:
            raise UsageError(str(exc)) from None
    elif args.csv:
        points = read_fit_csv(args.csv)
    else:
        raise UsageError("fit needs a CSV path or --synth")
    if len(points) < 2:
        raise UsageError(f"need at least 2 valid rows, got {len(points)}")
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            fit = powerlaw_fit(points)
    except (DomainError, DegenerateDesignError, InsufficientDataError) as exc:
        raise UsageError(str(exc)) from None
    if fit.low_count and not args.quiet:
        _warn(f"fit uses only {fit.n_points} points")
    sys.stdout.write(fit.to_json() + "\n")
    return EXIT_OK


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--jobs", type=int, default=argparse.SUPPRESS,
                        help="parallel simulations for sweep (default: CPU count)")
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS,
                        help="override random seeds (random_shear, synthetic data)")
    common.add_argument("--no-timestamp", action="store_true", default=argparse.SUPPRESS,
                        help="omit the date from SVG metadata")
    common.add_argument("--quiet", action="store_true", default=argparse.SUPPRESS)

    parser = argparse.ArgumentParser(prog="nstransition", parents=[common],
                                     description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common], help="run the spectral solver")
    p.add_argument("config")
    p.add_argument("--out", "-o", required=True)
    p.set_defaults(func=cmd_simulate)

    for name, func, helptext in (("diagnose", cmd_diagnose, "diagnostics CSV per snapshot"),
                                 ("report", cmd_report, "diagnostics CSV plus regime chart")):
        p = sub.add_parser(name, parents=[common], help=helptext)
        p.add_argument("snapshots", help="directory of snap_*.bin files or a glob")
        p.add_argument("--params", required=True, help="JSON with nu, rho, g, u_char, l_char")
        p.add_argument("--theta", type=float, default=0.5)
        p.add_argument("--critical-tol", type=float, default=1e-3)
        p.add_argument("--out", "-o", required=(name == "report"))
        p.set_defaults(func=func)

    p = sub.add_parser("sweep", parents=[common], help="Reynolds-number sweep")
    p.add_argument("config")
    p.add_argument("--out", "-o", required=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("fit", parents=[common], help="power-law fit of tau_trans vs Re")
    p.add_argument("csv", nargs="?")
    p.add_argument("--synth", action="store_true", help="fit a synthetic dataset instead")
    p.add_argument("--k1", type=float, default=1.3)
    p.add_argument("--noise", type=float, default=0.01)
    p.add_argument("--n", type=int, default=20)
    p.add_argument("--re-min", type=float, default=1e3)
    p.add_argument("--re-max", type=float, default=1e5)
    p.set_defaults(func=cmd_fit)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    args.jobs = getattr(args, "jobs", None)
    if args.jobs is None:
        args.jobs = os.cpu_count() or 1
    args.seed = getattr(args, "seed", None)
    args.no_timestamp = getattr(args, "no_timestamp", False)
    args.quiet = getattr(args, "quiet", False)
    if args.jobs < 1:
        print("error: --jobs must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except RuntimeFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
