"""Command-line driver: run, analyze, validate, scan.

Every command exits nonzero on failure and prints a machine-readable
error line ``error [<category>]: <message>`` to stderr.  ``run`` writes
nothing until the whole ensemble has been generated, so there are no
partial outputs to clean up after a failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from .config import SimConfig, parse_config_text
from .ensemble import (
    config_from_manifest,
    read_clicks,
    read_manifest,
    resolve_workers,
    run_ensemble,
    utc_now,
    write_clicks,
    write_manifest,
    _atomic_write,
)
from .errors import ConfigError, InsufficientData, PhasemcError
from .stats import (
    analytic_diffusion_dimensional,
    bin_clicks,
    energy_histogram,
    fit_dispersion,
    fit_thermal,
    mean_energy_law_check,
)
from .validate import run_validation

__all__ = ["main"]

TWO_PI = 2.0 * math.pi


def _load_config(path: str) -> SimConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    return parse_config_text(text)


def cmd_run(args: argparse.Namespace) -> int:
    config = _load_config(args.config) if args.config else SimConfig()
    out = Path(args.out)
    workers = resolve_workers(args.workers)
    started = utc_now()
    trajectories = run_ensemble(config, n_workers=workers)
    finished = utc_now()
    clicks_path = out / "clicks.csv"
    sha = write_clicks(clicks_path, config, trajectories)
    write_manifest(
        out / "manifest.json",
        config,
        trajectories,
        outputs={"clicks.csv": sha},
        started_utc=started,
        finished_utc=finished,
        n_workers=workers,
    )
    n_flagged = sum(tr.flagged for tr in trajectories)
    print(f"wrote {clicks_path} ({sum(tr.n_clicks for tr in trajectories)} clicks, "
          f"{len(trajectories)} trajectories, {n_flagged} flagged)")
    return 0


def _series_csv(series, config_hash: str) -> str:
    lines = [f"# config_hash={config_hash}"]
    lines.append("t_center,count,mean_x,mean_p,var_x,var_p,mean_e,var_e")
    for i in range(series.n_bins):
        lines.append(
            f"{series.t_centers[i]:.17g},{series.counts[i]},"
            f"{series.mean_x[i]:.17g},{series.mean_p[i]:.17g},"
            f"{series.var_x[i]:.17g},{series.var_p[i]:.17g},"
            f"{series.mean_e[i]:.17g},{series.var_e[i]:.17g}"
        )
    return "\n".join(lines) + "\n"


def _histogram_csv(hist, config_hash: str) -> str:
    lines = [
        f"# config_hash={config_hash} window=[{hist.t_lo:.17g},{hist.t_hi:.17g}] "
        f"n_clicks={hist.n_clicks} mean_energy={hist.mean_energy:.17g}"
    ]
    lines.append("e_lo,e_hi,count,density")
    for i in range(len(hist.counts)):
        lines.append(
            f"{hist.edges[i]:.17g},{hist.edges[i + 1]:.17g},"
            f"{hist.counts[i]},{hist.densities[i]:.17g}"
        )
    return "\n".join(lines) + "\n"


def cmd_analyze(args: argparse.Namespace) -> int:
    clicks_path = Path(args.clicks)
    manifest_path = Path(args.manifest) if args.manifest else clicks_path.parent / "manifest.json"
    manifest = read_manifest(manifest_path)
    config = config_from_manifest(manifest)
    file_hash, records = read_clicks(clicks_path, d_x=config.d_x, d_p=config.d_p)
    if file_hash != manifest["config_hash"]:
        raise ConfigError(
            f"clicks file hash {file_hash[:12]}... does not match manifest "
            f"{manifest['config_hash'][:12]}..."
        )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    series = bin_clicks(records, config.bin_width, t_total=config.t_final)
    _atomic_write(out / "series.csv", _series_csv(series, file_hash).encode("ascii"))

    fit_x = fit_dispersion(series, t_min=config.fit_t_min, coord="x")
    fit_p = fit_dispersion(series, t_min=config.fit_t_min, coord="p")
    energy_law = mean_energy_law_check(series, fit_x, e0=config.initial_energy)
    report = {
        "config_hash": file_hash,
        "bin_width": config.bin_width,
        "analytic_diffusion": analytic_diffusion_dimensional(
            config.gamma, config.d_x, config.d_p, config.sigma
        ),
        "x": fit_x.__dict__,
        "p": fit_p.__dict__,
        "energy_law": {
            "status": energy_law.status,
            "max_rel_deviation": energy_law.max_rel_deviation,
            "n_bins": energy_law.n_bins,
        },
    }

    t_end = config.t_final
    windows = {
        "energy_early.csv": (0.0, min(TWO_PI, t_end)),
        "energy_late.csv": (max(0.0, t_end - TWO_PI), t_end),
    }
    for name, window in windows.items():
        try:
            hist = energy_histogram(records, window, bins=args.energy_bins)
        except (InsufficientData, ConfigError) as exc:
            print(f"note: skipping {name}: {exc}", file=sys.stderr)
            report[name] = {"status": "skipped", "reason": str(exc)}
            continue
        _atomic_write(out / name, _histogram_csv(hist, file_hash).encode("ascii"))
        if name == "energy_late.csv":
            thermal = fit_thermal(hist)
            report["thermal"] = thermal.__dict__
    _atomic_write(out / "fit.json", json.dumps(report, indent=1).encode("ascii"))
    print(f"wrote {out / 'series.csv'}, {out / 'fit.json'} "
          f"(D_x={fit_x.diffusion:.4f}, intercept={fit_x.intercept:.4f}, r2={fit_x.r_squared:.4f})")
    return 0


def cmd_validate(args: argparse.Namespace) -> int:
    results = run_validation(quick=args.quick, tol_scale=args.tol_scale)
    width = max(len(r.name) for r in results)
    ok = True
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        ok &= r.passed
        print(f"{r.name:<{width}}  value={r.value:.3e}  tol={r.tolerance:.3e}  {status}")
    print("all checks passed" if ok else "VALIDATION FAILED")
    return 0 if ok else 1


def cmd_scan(args: argparse.Namespace) -> int:
    base = _load_config(args.config) if args.config else SimConfig()
    if args.n_traj:
        base = base.replace(n_traj=args.n_traj)
    values = [float(v) for v in args.values.split(",")]
    out = Path(args.out)
    rows = []
    for value in values:
        if args.param == "gamma":
            cfg = base.replace(gamma=value)
        elif args.param == "d":
            cfg = base.replace(d_x=value, d_p=value)
        else:
            raise ConfigError(f"unknown scan parameter {args.param!r}")
        subdir = out / f"{args.param}_{value:g}"
        started = utc_now()
        trajectories = run_ensemble(cfg, n_workers=resolve_workers(args.workers))
        finished = utc_now()
        sha = write_clicks(subdir / "clicks.csv", cfg, trajectories)
        write_manifest(
            subdir / "manifest.json",
            cfg,
            trajectories,
            outputs={"clicks.csv": sha},
            started_utc=started,
            finished_utc=finished,
            n_workers=resolve_workers(args.workers),
        )
        series = bin_clicks(trajectories, cfg.bin_width, t_total=cfg.t_final)
        fit_x = fit_dispersion(series, t_min=cfg.fit_t_min, coord="x")
        fit_p = fit_dispersion(series, t_min=cfg.fit_t_min, coord="p")
        rows.append(
            (args.param, value, cfg.gamma, cfg.d_x, cfg.d_p,
             fit_x.diffusion, fit_p.diffusion, fit_x.intercept, fit_p.intercept,
             fit_x.r_squared,
             analytic_diffusion_dimensional(cfg.gamma, cfg.d_x, cfg.d_p, cfg.sigma),
             cfg.n_traj, cfg.config_hash())
        )
        print(f"{args.param}={value:g}: D_x={fit_x.diffusion:.4f} "
              f"D_p={fit_p.diffusion:.4f} analytic={rows[-1][10]:.4f}")
    header = ("param,value,gamma,d_x,d_p,D_x,D_p,intercept_x,intercept_p,"
              "r2_x,analytic_D,n_traj,config_hash")
    lines = [header]
    for row in rows:
        lines.append(",".join(
            f"{v:.17g}" if isinstance(v, float) else str(v) for v in row
        ))
    _atomic_write(out / "scaling.csv", ("\n".join(lines) + "\n").encode("ascii"))
    print(f"wrote {out / 'scaling.csv'}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="phasemc",
        description="Quantum-jump Monte Carlo simulation of a harmonically "
        "trapped particle under repeated phase-space measurement.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="generate a trajectory ensemble")
    p_run.add_argument("--config", help="key=value config file (defaults apply if omitted)")
    p_run.add_argument("--out", required=True, help="output directory")
    p_run.add_argument("--workers", type=int, default=None, help="parallel workers")
    p_run.set_defaults(func=cmd_run)

    p_an = sub.add_parser("analyze", help="bin, fit and histogram a clicks file")
    p_an.add_argument("--clicks", required=True, help="clicks CSV from 'run'")
    p_an.add_argument("--manifest", help="manifest path (default: next to clicks)")
    p_an.add_argument("--out", required=True, help="output directory")
    p_an.add_argument("--energy-bins", type=int, default=40)
    p_an.set_defaults(func=cmd_analyze)

    p_val = sub.add_parser("validate", help="run the built-in oracle suite")
    p_val.add_argument("--quick", action="store_true", help="smaller, looser checks")
    p_val.add_argument("--tol-scale", type=float, default=None)
    p_val.set_defaults(func=cmd_validate)

    p_scan = sub.add_parser("scan", help="parameter sweep with per-value fits")
    p_scan.add_argument("--param", required=True, choices=["gamma", "d"])
    p_scan.add_argument("--values", required=True, help="comma-separated values")
    p_scan.add_argument("--config", help="base config file")
    p_scan.add_argument("--out", required=True)
    p_scan.add_argument("--n-traj", type=int, default=None, help="override ensemble size")
    p_scan.add_argument("--workers", type=int, default=None)
    p_scan.set_defaults(func=cmd_scan)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except PhasemcError as exc:
        print(f"error [{exc.category}]: {exc}", file=sys.stderr)
        return 2 if isinstance(exc, ConfigError) else 1


if __name__ == "__main__":
    sys.exit(main())
