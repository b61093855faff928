"""Command-line front end.

    nlslab <subcommand> --config PATH [--resume PATH] [--out DIR] [--workers N] [--seed N]

Exit codes: 0 success, 1 runtime or numerical failure, 2 configuration
error, 3 verification failure.  ``NLSLAB_OUT`` overrides ``--out``.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import KEYS, ConfigError, RunConfig, load_config
from .cutoffs import build_cutoffs
from .detector import (
    BELOW,
    BLOWUP,
    classify_initial,
    kinetic_mass_track,
    scattering_verdict,
    windowed_norm,
)
from .evolve import (
    CheckpointError,
    Resume,
    conservation_report,
    evolve,
    initial_field,
    load_checkpoint,
)
from .ground_state import cached_ground_state, pohozaev_residuals, thresholds
from .morawetz import SeriesTooShortError, local_smoothing_average
from .series import SeriesFormatError, TimeSeries, read_series, write_series

EXIT_OK, EXIT_RUNTIME, EXIT_CONFIG, EXIT_VERIFY = 0, 1, 2, 3


@dataclass
class ExperimentManifest:
    name: str
    config: RunConfig
    out_dir: Path
    seed: int = 0
    outputs: dict[str, Path] = field(default_factory=dict)

    def path(self, kind: str, filename: str) -> Path:
        p = self.out_dir / filename
        self.outputs[kind] = p
        return p


def _dump_json(obj, path: Path) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, allow_nan=False, default=_jsonable) + "\n")


def _jsonable(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    raise TypeError(f"not serializable: {type(x).__name__}")


def _finite(x: float) -> float | None:
    return float(x) if math.isfinite(x) else None


# summaries

def summarize_series(series: TimeSeries, cfg: RunConfig) -> dict:
    """Drifts, flux averages per T0, minimum windowed L5 and the verdict."""
    out: dict = {"termination": series.termination, "rows": len(series.rows)}
    if not series.rows:
        return out
    mass_drift, energy_drift = conservation_report(series)
    out["mass_drift"] = mass_drift
    out["energy_drift"] = energy_drift
    last = series.rows[-1]
    out["final"] = {"t": last.t, "mass": last.norms.mass, "energy": last.norms.energy,
                    "kinetic": last.norms.kinetic, "l4": last.norms.l4_fourth, "linf": last.norms.sup_abs}
    averages = {}
    if not series.euclidean:
        for T0 in cfg.detector_T0:
            try:
                averages[repr(T0)] = local_smoothing_average(series, T0)
            except SeriesTooShortError:
                averages[repr(T0)] = None
    out["flux_averages"] = averages
    t = series.times
    mins = [windowed_norm(series, 5, (a, a + cfg.detector_window_len)) for a in t
            if a + cfg.detector_window_len <= t[-1] + 1e-9]
    out["min_window_l5"] = min(mins) if mins else None
    verdict = scattering_verdict(series, cfg.detector_eps, cfg.detector_window_len)
    out["verdict"] = verdict.as_dict()
    return out


def _tc(cfg: RunConfig):
    return thresholds(cached_ground_state(), cfg.detector_delta_prime)


# subcommands

def cmd_ground_state(args, manifest: ExperimentManifest) -> int:
    gs = cached_ground_state()
    tc = _tc(manifest.config)
    k_res, q_res = pohozaev_residuals(gs)
    doc = {
        "a0": gs.a0,
        "mass": gs.norms.mass, "kinetic": gs.norms.kinetic, "l4": gs.norms.l4_fourth,
        "energy": gs.norms.energy,
        "pohozaev_kinetic_residual": k_res, "pohozaev_quartic_residual": q_res,
        "em_threshold": tc.em_threshold, "k_threshold": tc.k_threshold, "gn_constant": tc.gn_constant,
    }
    _dump_json(doc, manifest.path("summary", "ground_state.json"))
    print(json.dumps(doc, indent=2, sort_keys=True))
    return EXIT_OK


def cmd_evolve(args, manifest: ExperimentManifest) -> int:
    cfg = manifest.config
    resume = None
    if args.resume:
        state, dt, baseline = load_checkpoint(args.resume)
        if dt != cfg.dt:
            raise CheckpointError(f"checkpoint dt {dt!r} differs from the configured {cfg.dt!r}")
        resume = Resume(state, baseline)
    ckpt = manifest.path("checkpoint", "checkpoint.json")
    series = evolve(cfg, resume=resume, checkpoint_path=ckpt)
    write_series(series, manifest.path("series", "series.csv"))
    summary = summarize_series(series, cfg)
    f0 = initial_field(cfg.initial_data, cfg.grid())
    cls = classify_initial(f0, _tc(cfg)) if np.any(f0.v) else None
    summary["classification"] = None if cls is None else cls.kind
    _dump_json(summary, manifest.path("summary", "summary.json"))
    print(f"{series.termination}: {len(series.rows)} rows -> {manifest.outputs['series']}")
    if cls is not None and cls.kind == BELOW and series.termination == "blowup":
        print("error: below-threshold data blew up", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def cmd_diagnose(args, manifest: ExperimentManifest) -> int:
    cfg = manifest.config
    if args.dump_cutoffs:
        cf = build_cutoffs(cfg.cutoff_R0, cfg.cutoff_eta, cfg.cutoff_n_tab)
        r = cf.rho * cf.R
        buf = io.StringIO()
        buf.write("r,chi,phi,phi1,psi\n")
        for row in zip(r, cf.chi, cf.phi, cf.phi1, cf.psi):
            buf.write(",".join(repr(float(x)) for x in row) + "\n")
        manifest.path("cutoffs", "cutoffs.csv").write_text(buf.getvalue())
        print(f"cutoffs -> {manifest.outputs['cutoffs']}")
    if args.series:
        series = read_series(args.series)
        verdict = scattering_verdict(series, cfg.detector_eps, cfg.detector_window_len)
        _dump_json(verdict.as_dict(), manifest.path("verdict", "verdict.json"))
        print(json.dumps(verdict.as_dict(), sort_keys=True))
    elif not args.dump_cutoffs:
        raise ConfigError("diagnose needs --series or --dump-cutoffs")
    return EXIT_OK


def cmd_report(args, manifest: ExperimentManifest) -> int:
    if not args.series:
        raise ConfigError("report needs --series")
    series = read_series(args.series)
    summary = summarize_series(series, manifest.config)
    _dump_json(summary, manifest.path("report", "report.json"))
    print(json.dumps(summary, indent=2, sort_keys=True))
    return EXIT_OK


def check_param(cfg: RunConfig, key: str) -> None:
    if key.startswith("initial_data."):
        name = key.split(".", 1)[1]
        if name not in dict(cfg.initial_data.params):
            raise ConfigError(f"unknown parameter path {key!r} for {cfg.initial_data.kind} data", key=key)
    elif key not in KEYS:
        raise ConfigError(f"unknown parameter path {key!r}", key=key)


def run_sweep_point(cfg: RunConfig, key: str, value: float) -> dict:
    run_cfg = cfg.with_value(key, value)
    f0 = initial_field(run_cfg.initial_data, run_cfg.grid())
    tc = _tc(run_cfg)
    kind = classify_initial(f0, tc).kind if np.any(f0.v) else "Zero"
    series = evolve(run_cfg, with_interaction=False)
    verdict = scattering_verdict(series, run_cfg.detector_eps, run_cfg.detector_window_len)
    return {
        "value": value,
        "classification": kind,
        "verdict": verdict.kind,
        "kinetic_mass_ratio": kinetic_mass_track(series, tc).ratio,
        "final_l4": series.rows[-1].norms.l4_fourth,
    }


SWEEP_COLUMNS = ("value", "classification", "verdict", "kinetic_mass_ratio", "final_l4")


def sweep(cfg: RunConfig, key: str, values: list[float], workers: int = 1) -> list[dict]:
    """One row per value, in input order; independent of the worker count."""
    check_param(cfg, key)
    if not values:
        return []
    if workers <= 1:
        return [run_sweep_point(cfg, key, v) for v in values]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run_sweep_point, [cfg] * len(values), [key] * len(values), values))


def sweep_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_COLUMNS)
    for row in rows:
        w.writerow([repr(row[c]) if isinstance(row[c], float) else row[c] for c in SWEEP_COLUMNS])
    return buf.getvalue()


def cmd_sweep(args, manifest: ExperimentManifest) -> int:
    if not args.param:
        raise ConfigError("sweep needs --param")
    try:
        values = [float(x) for x in (args.values or "").split(",") if x.strip()]
    except ValueError:
        raise ConfigError(f"--values must be comma-separated numbers, got {args.values!r}") from None
    rows = sweep(manifest.config, args.param, values, args.workers)
    text = sweep_csv(rows)
    manifest.path("sweep", "sweep.csv").write_text(text)
    sys.stdout.write(text)
    bad = [r for r in rows if r["classification"] == BELOW and r["verdict"] == BLOWUP]
    return EXIT_RUNTIME if bad else EXIT_OK


def cmd_verify(args, manifest: ExperimentManifest) -> int:
    from .verify import run_checks, summarize

    checks = run_checks(seed=manifest.seed, quick=not args.full)
    ok = summarize(checks)
    _dump_json({c.name: {"value": _finite(c.value), "tolerance": c.tolerance, "passed": c.passed,
                         "gated": c.gated} for c in checks},
               manifest.path("verify", "verify.json"))
    return EXIT_OK if ok else EXIT_VERIFY


COMMANDS = {
    "ground-state": cmd_ground_state,
    "evolve": cmd_evolve,
    "diagnose": cmd_diagnose,
    "sweep": cmd_sweep,
    "verify": cmd_verify,
    "report": cmd_report,
}

NEEDS_CONFIG = {"evolve", "sweep"}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nlslab", description="Radial focusing cubic NLS experiments.")
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", type=Path, help="run configuration (key = value file)")
    p.add_argument("--resume", type=Path, help="checkpoint to continue from (evolve)")
    p.add_argument("--out", type=Path, default=Path("."), help="output directory (NLSLAB_OUT overrides)")
    p.add_argument("--workers", type=int, default=1, help="parallel runs (sweep)")
    p.add_argument("--seed", type=int, default=0, help="seed for randomized suites")
    p.add_argument("--series", type=Path, help="series CSV (diagnose, report)")
    p.add_argument("--dump-cutoffs", action="store_true", help="write r, chi, phi, phi1, psi (diagnose)")
    p.add_argument("--param", help="dotted config key to sweep, e.g. initial_data.amplitude")
    p.add_argument("--values", help="comma-separated sweep values")
    p.add_argument("--full", action="store_true", help="verify: include refinement studies")
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    out = Path(os.environ.get("NLSLAB_OUT") or args.out)
    try:
        if args.config is None and args.command in NEEDS_CONFIG:
            raise ConfigError(f"{args.command} needs --config")
        cfg = load_config(args.config) if args.config else RunConfig()
        if args.workers < 1:
            raise ConfigError("--workers must be at least 1")
        out.mkdir(parents=True, exist_ok=True)
        name = args.config.stem if args.config else args.command
        manifest = ExperimentManifest(name, cfg, out, args.seed)
        return COMMANDS[args.command](args, manifest)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SeriesFormatError, CheckpointError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except (ArithmeticError, RuntimeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
