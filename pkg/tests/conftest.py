"""Shared fixtures: cached ensemble runs for the heavy acceptance tests.

Ensembles are deterministic functions of their config, so a finished run
can be reused across test sessions.  Runs live under the artifacts
directory (override with PHASEMC_ARTIFACTS); a cached run is accepted
only if its manifest hash matches the requested config.  Delete the
directory to force fresh computation.
"""

from __future__ import annotations

import os
from pathlib import Path

import pytest

from phasemc.config import SimConfig
from phasemc.ensemble import (
    read_clicks,
    read_manifest,
    resolve_workers,
    run_ensemble,
    utc_now,
    write_clicks,
    write_manifest,
)

REPO_ROOT = Path(__file__).resolve().parent.parent


def artifact_root() -> Path:
    root = Path(os.environ.get("PHASEMC_ARTIFACTS", REPO_ROOT / "artifacts"))
    root.mkdir(parents=True, exist_ok=True)
    return root


def ensure_run(config: SimConfig, label: str, n_workers: int | None = None) -> Path:
    """Run (or reuse) an ensemble; returns its output directory."""
    out = artifact_root() / label
    clicks = out / "clicks.csv"
    manifest = out / "manifest.json"
    if clicks.exists() and manifest.exists():
        if read_manifest(manifest)["config_hash"] == config.config_hash():
            return out
    workers = resolve_workers(n_workers)
    started = utc_now()
    trajectories = run_ensemble(config, n_workers=workers)
    finished = utc_now()
    sha = write_clicks(clicks, config, trajectories)
    write_manifest(
        manifest,
        config,
        trajectories,
        outputs={"clicks.csv": sha},
        started_utc=started,
        finished_utc=finished,
        n_workers=workers,
    )
    return out


def load_records(out_dir: Path, config: SimConfig):
    _, records = read_clicks(out_dir / "clicks.csv", d_x=config.d_x, d_p=config.d_p)
    return records


@pytest.fixture(scope="session")
def r0_config() -> SimConfig:
    # the desk-scale reference ensemble: all defaults
    return SimConfig()


@pytest.fixture(scope="session")
def r0_run(r0_config) -> Path:
    return ensure_run(r0_config, "r0")


@pytest.fixture(scope="session")
def r0_records(r0_run, r0_config):
    return load_records(r0_run, r0_config)
