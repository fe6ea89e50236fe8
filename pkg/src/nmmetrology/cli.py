"""Config-driven experiment runner. The only module that touches the filesystem.

Usage::

    nmmetrology run configs/fisher_sweep.json --output-dir out/ --threads 0
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import __version__
from .control import OBJECTIVES
from .errors import (
    ConfigError,
    ExcitationOverflowError,
    IntegrationError,
    NegativeEigenvalueError,
    NonHermitianError,
)
from .experiments import (
    flows_control,
    flows_uncontrolled,
    fisher_sweep,
    optimize_sweep,
    phi_axis,
    qsl_sweep,
    s_axis,
)
from .metrology import FISHER_TAGS
from .model import InitialStateParam, ModelParams
from .nonmarkov import DEFAULT_RESOLUTION
from .speedlimits import QSL_HORIZON_FACTOR

EXIT_OK, EXIT_SCHEMA, EXIT_NUMERICAL = 0, 1, 2

KINDS = ("fisher-sweep", "qsl-sweep", "qsl-map", "optimize-sweep",
         "flows-control", "flows-uncontrolled")
SWEEP_KINDS = KINDS[:4]

NUMERICAL_ERRORS = (IntegrationError, NegativeEigenvalueError, NonHermitianError,
                    ExcitationOverflowError, FloatingPointError, np.linalg.LinAlgError)


@dataclass
class RunConfig:
    """Flat experiment config. ``lambda`` in JSON maps to ``lam``."""

    kind: str
    a1: float = 0.4
    a2: float = 0.6
    rabi: float = 5.0
    lam: float = 1.0
    horizon: float = 2.0
    grid_points: int = 2000
    s_grid: int | list = 41
    phi_grid: int | list = 5
    target_angle: float = float(np.pi / 4)
    segments: int = 8
    eps_max: float | None = None
    restarts: int = 20
    seed: int = 0
    objective: str = "qfi_lambda_at_T"
    output_dir: str = "output"
    # optional extras
    tags: list = field(default_factory=lambda: list(FISHER_TAGS))
    qsl_horizon_factor: float = QSL_HORIZON_FACTOR
    qsl_grid_points: int = 20000
    blp_resolution: int = DEFAULT_RESOLUTION
    maxfev: int = 3000

    @property
    def model(self) -> ModelParams:
        return ModelParams(a1=self.a1, a2=self.a2, rabi=self.rabi, lam=self.lam,
                           horizon=self.horizon)

    def s_values(self) -> np.ndarray:
        if isinstance(self.s_grid, int):
            return s_axis(self.model, self.s_grid)
        return np.asarray(self.s_grid, dtype=float)

    def phi_values(self) -> np.ndarray:
        if isinstance(self.phi_grid, int):
            return phi_axis(self.phi_grid)
        return np.asarray(self.phi_grid, dtype=float)

    def resolved(self) -> dict:
        out = asdict(self)
        out["lambda"] = out.pop("lam")
        out["eps_max"] = 20.0 * self.lam if self.eps_max is None else self.eps_max
        out["s_values"] = [float(x) for x in self.s_values()]
        out["phi_values"] = [float(x) for x in self.phi_values()]
        return out


_FLOAT_KEYS = {"a1", "a2", "rabi", "lam", "horizon", "target_angle", "eps_max",
               "qsl_horizon_factor"}
_INT_KEYS = {"grid_points", "segments", "restarts", "seed", "qsl_grid_points",
             "blp_resolution", "maxfev"}


def _is_number(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _check_grid(name, v, single):
    if isinstance(v, int) and not isinstance(v, bool):
        if single or v < 2:
            raise ConfigError(f"{name}: expected a list of values" if single
                              else f"{name}: need at least 2 points")
        return v
    if not isinstance(v, list) or not v or not all(_is_number(x) for x in v):
        raise ConfigError(f"{name}: expected a point count or a non-empty list of numbers")
    if single and len(v) != 1:
        raise ConfigError(f"{name}: flow reports take exactly one value")
    return [float(x) for x in v]


def parse_config(data: dict) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    data = dict(data)
    if "lambda" in data:
        data["lam"] = data.pop("lambda")
    known = {f.name for f in fields(RunConfig)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"unknown keys: {', '.join(unknown)}")
    if data.get("kind") not in KINDS:
        raise ConfigError(f"kind must be one of {KINDS}, got {data.get('kind')!r}")
    for key in _FLOAT_KEYS & set(data):
        if key == "eps_max" and data[key] is None:
            continue
        if not _is_number(data[key]):
            raise ConfigError(f"{key}: expected a number")
        data[key] = float(data[key])
    for key in _INT_KEYS & set(data):
        if not isinstance(data[key], int) or isinstance(data[key], bool):
            raise ConfigError(f"{key}: expected an integer")
    single = data["kind"] not in SWEEP_KINDS
    for key in ("s_grid", "phi_grid"):
        if key in data:
            data[key] = _check_grid(key, data[key], single)
        elif single:
            data[key] = [0.0]
    if "objective" in data and data["objective"] not in OBJECTIVES:
        raise ConfigError(f"objective must be one of {OBJECTIVES}")
    if "tags" in data and (not isinstance(data["tags"], list)
                           or not set(data["tags"]) <= set(FISHER_TAGS) or not data["tags"]):
        raise ConfigError(f"tags must be a non-empty subset of {FISHER_TAGS}")
    if not isinstance(data.get("output_dir", ""), str):
        raise ConfigError("output_dir: expected a string")
    cfg = RunConfig(**data)
    try:
        cfg.model
        for s in cfg.s_values():
            for phi in cfg.phi_values():
                InitialStateParam(float(s), float(phi))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if cfg.grid_points < 2 or cfg.qsl_grid_points < 2 or cfg.segments < 1 or cfg.restarts < 1:
        raise ConfigError("grid_points, segments and restarts must be positive")
    if cfg.eps_max is not None and cfg.eps_max < 0:
        raise ConfigError("eps_max must be non-negative")
    if not 0.0 < cfg.target_angle <= np.pi / 2:
        raise ConfigError("target_angle must lie in (0, pi/2]")
    if cfg.blp_resolution < 2 or cfg.maxfev < 1:
        raise ConfigError("blp_resolution must be >= 2 and maxfev >= 1")
    return cfg


def load_config(path) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    return parse_config(data)


def fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return "" if value is None else str(value)


def write_csv(path: Path, header, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])


def _log(x):
    return float(np.log(x)) if np.isfinite(x) and x > 0 else float("inf")


def _fisher_tables(cfg, workers):
    rows = fisher_sweep(cfg.model, cfg.s_values(), cfg.phi_values(), tuple(cfg.tags),
                        cfg.grid_points, workers)
    return {"fisher_sweep.csv": (("s", "phi", "tag", "f_tot"), rows)}


def _qsl_tables(cfg, workers):
    rows = qsl_sweep(cfg.model, cfg.s_values(), cfg.phi_values(), cfg.target_angle,
                     cfg.qsl_grid_points, cfg.qsl_horizon_factor, workers)
    header = ["s", "phi", "tau_f", "tau_op", "log_tau_f", "log_tau_op",
              "traveled", "threshold", "saturated_f", "saturated"]
    table = []
    for s, phi, f, op in rows:
        table.append([s, phi, f.tau, op.tau, _log(f.tau), _log(op.tau), op.traveled,
                      op.threshold, f.saturated, op.saturated])
    if cfg.kind == "qsl-map":
        finite = [r[5] for r in table if np.isfinite(r[5])]
        floor = min(finite) if finite else 0.0
        header.append("log_tau_op_shifted")
        for r in table:
            r.append(r[5] - floor)
        return {"qsl_map.csv": (header, table)}
    return {"qsl_sweep.csv": (header, table)}


def _optimize_tables(cfg, workers):
    rows = optimize_sweep(cfg.model, cfg.s_values(), cfg.phi_values(), cfg.objective,
                          cfg.segments, cfg.eps_max, cfg.restarts, cfg.seed,
                          cfg.grid_points, cfg.maxfev, workers)
    main = [(r.s, r.phi, r.f_T_uncontrolled, r.f_max_uncontrolled, r.f_tot_uncontrolled,
             r.f_T_optimized) for r in rows]
    pulses = [(r.s, r.phi, k, amp) for r in rows for k, amp in enumerate(r.pulse.amplitudes)]
    return {
        "optimize_sweep.csv": (("s", "phi", "f_T_uncontrolled", "f_max_uncontrolled",
                                "f_tot_uncontrolled", "f_T_optimized"), main),
        "pulses.csv": (("s", "phi", "segment", "amplitude"), pulses),
    }


def _flow_tables(scenarios):
    names = list(scenarios[0].curves)
    series, intervals, overlaps, summary, pulses = [], [], [], [], []
    for sc in scenarios:
        for i, t in enumerate(sc.times):
            series.append([sc.name, t] + [sc.curves[k][i] for k in names])
        for k in names:
            intervals.extend((sc.name, k, a, b) for a, b in sc.intervals[k].intervals)
        overlaps.extend((sc.name, a, b, v) for (a, b), v in sc.overlaps.items())
        summary.append((sc.name, sc.blp_value, sc.blp_pair[0].s, sc.blp_pair[0].phi,
                        sc.blp_pair[1].s, sc.blp_pair[1].phi, sc.objective_value))
        pulses.extend((sc.name, k, a) for k, a in enumerate(sc.pulse.amplitudes))
    return {
        "timeseries.csv": (["scenario", "t"] + names, series),
        "intervals.csv": (("scenario", "curve", "start", "end"), intervals),
        "overlaps.csv": (("scenario", "a", "b", "overlap_fraction"), overlaps),
        "scenarios.csv": (("scenario", "blp", "pair_s1", "pair_phi1", "pair_s2",
                           "pair_phi2", "objective_value"), summary),
        "pulses.csv": (("scenario", "segment", "amplitude"), pulses),
    }


def _flows(cfg, workers):
    p = InitialStateParam(float(cfg.s_values()[0]), float(cfg.phi_values()[0]))
    if cfg.kind == "flows-control":
        scenarios = flows_control(cfg.model, p, cfg.objective, cfg.segments, cfg.eps_max,
                                  cfg.restarts, cfg.seed, cfg.grid_points, cfg.maxfev,
                                  cfg.blp_resolution)
    else:
        scenarios = flows_uncontrolled(cfg.model, p, cfg.grid_points, cfg.blp_resolution)
    return _flow_tables(scenarios)


_RUNNERS = {
    "fisher-sweep": _fisher_tables,
    "qsl-sweep": _qsl_tables,
    "qsl-map": _qsl_tables,
    "optimize-sweep": _optimize_tables,
    "flows-control": _flows,
    "flows-uncontrolled": _flows,
}


def resolve_threads(threads: int) -> int:
    if threads == 0:
        return os.cpu_count() or 1
    return max(1, threads)


def execute(cfg: RunConfig, output_dir=None, threads: int = 1) -> Path:
    """Run ``cfg`` and write its tables plus manifest.json; returns the output directory."""
    out = Path(output_dir or cfg.output_dir)
    workers = resolve_threads(threads)
    tables = _RUNNERS[cfg.kind](cfg, workers)
    for name, (_, rows) in tables.items():
        if any(isinstance(v, float) and np.isnan(v) for row in rows for v in row):
            raise FloatingPointError(f"NaN in {name}")
    out.mkdir(parents=True, exist_ok=True)
    digests = {}
    for name, (header, rows) in tables.items():
        write_csv(out / name, header, rows)
        digests[name] = hashlib.sha256((out / name).read_bytes()).hexdigest()
    manifest = {
        "version": __version__,
        "config": cfg.resolved(),
        "seeds": {"seed": cfg.seed,
                  "restart_streams": "SeedSequence(seed).spawn(restarts), one per restart"},
        "threads": workers,
        "outputs": digests,
    }
    with open(out / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True, allow_nan=True)
        fh.write("\n")
    return out


def run_experiment(config_path, output_dir=None, threads: int = 1,
                   dry_run: bool = False) -> int:
    try:
        cfg = load_config(config_path)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    if dry_run:
        print(json.dumps(cfg.resolved(), sort_keys=True))
        return EXIT_OK
    try:
        out = execute(cfg, output_dir, threads)
    except NUMERICAL_ERRORS as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    print(f"wrote {out}")
    return EXIT_OK


def flows_report(config_path, output_dir=None, threads: int = 1) -> int:
    """Same as ``run_experiment`` but refuses anything other than a flow kind."""
    try:
        cfg = load_config(config_path)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    if cfg.kind not in ("flows-control", "flows-uncontrolled"):
        print(f"config error: {cfg.kind!r} is not a flow report", file=sys.stderr)
        return EXIT_SCHEMA
    return run_experiment(config_path, output_dir, threads)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nmmetrology")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run one experiment config")
    run.add_argument("config")
    run.add_argument("--output-dir", default=None)
    run.add_argument("--threads", type=int, default=1, help="worker processes, 0 = auto")
    run.add_argument("--dry-run", action="store_true", help="validate the config only")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads < 0:
        print("config error: --threads must be >= 0", file=sys.stderr)
        return EXIT_SCHEMA
    return run_experiment(args.config, args.output_dir, args.threads, args.dry_run)


if __name__ == "__main__":
    sys.exit(main())
