"""Deterministic ensemble orchestration and bit-stable on-disk outputs.

Trajectories are independent tasks; each is a pure function of
(config, index), so results are identical no matter how many workers run
them or in which order they finish.  Workers are forked after the engine
is built, sharing its read-only tables.

File formats (all written atomically: temp file + rename):

clicks CSV
    one header line carrying the config hash and the column names,
    then one row per click, grouped by trajectory in index order:

        config_hash=<hex>,traj_index,t,j,k,x,p
        0,5.0000000000000003e-03,9,0,19.440000000000001,0

    floats are printed with 17 significant digits (lossless round-trip).

manifest JSON
    canonical config text, hash, code version, wall times, per-trajectory
    seeds/summaries, and the SHA-256 of every output file.  The manifest
    alone suffices to reproduce the run bit-exactly.
"""

from __future__ import annotations

import hashlib
import json
import multiprocessing
import os
import tempfile
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .config import SimConfig, parse_config_text
from .errors import ConfigError
from .evolution import Trajectory, TrajectoryEngine

__all__ = [
    "run_ensemble",
    "write_clicks",
    "read_clicks",
    "write_manifest",
    "read_manifest",
    "resolve_workers",
    "TrajectoryClicks",
]

WORKERS_ENV = "PHASEMC_WORKERS"

_WORKER_ENGINE: TrajectoryEngine | None = None
_WORKER_KEEP = False


def resolve_workers(requested: int | None = None) -> int:
    """Worker count: explicit argument, else env override, else CPU count."""
    if requested is not None:
        n = requested
    elif os.environ.get(WORKERS_ENV):
        try:
            n = int(os.environ[WORKERS_ENV])
        except ValueError:
            raise ConfigError(f"{WORKERS_ENV} must be an integer") from None
    else:
        n = os.cpu_count() or 1
    if n < 1:
        raise ConfigError(f"worker count must be >= 1, got {n}")
    return n


def _limit_blas_threads() -> None:
    # trajectory workers are already process-parallel; per-process BLAS
    # threading would oversubscribe the machine
    try:
        from threadpoolctl import threadpool_limits

        threadpool_limits(limits=1, user_api="blas")
    except Exception:
        pass


def _worker_run(index: int) -> Trajectory:
    assert _WORKER_ENGINE is not None
    return _WORKER_ENGINE.run(index, keep_state=_WORKER_KEEP)


def _worker_init() -> None:
    _limit_blas_threads()


def run_ensemble(
    config: SimConfig,
    n_workers: int | None = None,
    keep_states: bool = False,
    indices: list[int] | None = None,
) -> list[Trajectory]:
    """Generate the configured ensemble, ordered by trajectory index.

    Results are invariant under ``n_workers`` by construction.
    """
    global _WORKER_ENGINE, _WORKER_KEEP
    workers = resolve_workers(n_workers)
    todo = list(range(config.n_traj)) if indices is None else list(indices)
    engine = TrajectoryEngine(config)
    _WORKER_ENGINE = engine
    _WORKER_KEEP = keep_states
    try:
        if workers == 1 or len(todo) <= 1:
            _limit_blas_threads()
            return [engine.run(i, keep_state=keep_states) for i in todo]
        ctx = multiprocessing.get_context("fork")
        chunk = max(1, len(todo) // (workers * 8))
        with ctx.Pool(processes=workers, initializer=_worker_init) as pool:
            results = pool.map(_worker_run, todo, chunksize=chunk)
        return results
    finally:
        _WORKER_ENGINE = None
        _WORKER_KEEP = False


# ----- clicks file ---------------------------------------------------------


def _atomic_write(path: Path, data: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_clicks(path: str | Path, config: SimConfig, trajectories: list[Trajectory]) -> str:
    """Write the clicks CSV; returns the SHA-256 of the written bytes."""
    lines = [f"config_hash={config.config_hash()},traj_index,t,j,k,x,p"]
    for tr in trajectories:
        for t, j, k in zip(tr.times, tr.js, tr.ks):
            x = j * config.d_x
            p = k * config.d_p
            lines.append(f"{tr.index},{t:.17g},{j},{k},{x:.17g},{p:.17g}")
    data = ("\n".join(lines) + "\n").encode("ascii")
    _atomic_write(Path(path), data)
    return hashlib.sha256(data).hexdigest()


@dataclass
class TrajectoryClicks:
    """Click record of one trajectory as read back from a clicks file."""

    index: int
    times: np.ndarray
    js: np.ndarray
    ks: np.ndarray
    d_x: float
    d_p: float

    @property
    def n_clicks(self) -> int:
        return len(self.times)

    @property
    def x(self) -> np.ndarray:
        return self.js * self.d_x

    @property
    def p(self) -> np.ndarray:
        return self.ks * self.d_p


def read_clicks(
    path: str | Path,
    d_x: float | None = None,
    d_p: float | None = None,
) -> tuple[str, list[TrajectoryClicks]]:
    """Parse a clicks CSV into per-trajectory records.

    Returns (config_hash, records).  Pass the lattice spacings when known
    (e.g. from the manifest); otherwise they are recovered from the stored
    centers, which is exact because centers are written as j·d_x, k·d_p.
    """
    path = Path(path)
    with open(path, "r", encoding="ascii") as fh:
        header = fh.readline().strip()
        if not header.startswith("config_hash="):
            raise ConfigError(f"{path}: missing config_hash header")
        config_hash = header.split(",", 1)[0].split("=", 1)[1]
        by_index: dict[int, list[tuple[float, int, int, float, float]]] = {}
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 6:
                raise ConfigError(f"{path}:{lineno}: expected 6 fields")
            idx = int(parts[0])
            by_index.setdefault(idx, []).append(
                (float(parts[1]), int(parts[2]), int(parts[3]), float(parts[4]), float(parts[5]))
            )
    records = []
    for idx in sorted(by_index):
        rows = by_index[idx]
        times = np.array([r[0] for r in rows])
        js = np.array([r[1] for r in rows], dtype=np.int64)
        ks = np.array([r[2] for r in rows], dtype=np.int64)
        dx_rec = d_x if d_x is not None else _infer_spacing(js, np.array([r[3] for r in rows]))
        dp_rec = d_p if d_p is not None else _infer_spacing(ks, np.array([r[4] for r in rows]))
        records.append(TrajectoryClicks(idx, times, js, ks, dx_rec, dp_rec))
    return config_hash, records


def _infer_spacing(indices: np.ndarray, centers: np.ndarray) -> float:
    nz = indices != 0
    if not np.any(nz):
        # every click at index 0: the spacing never enters x = j·d
        return 1.0
    return float(centers[nz][0] / indices[nz][0])


# ----- manifest ------------------------------------------------------------


def write_manifest(
    path: str | Path,
    config: SimConfig,
    trajectories: list[Trajectory],
    outputs: dict[str, str],
    started_utc: str,
    finished_utc: str,
    n_workers: int,
) -> None:
    doc = {
        "config_hash": config.config_hash(),
        "config": config.canonical_text(),
        "code_version": __version__,
        "started_utc": started_utc,
        "finished_utc": finished_utc,
        "n_workers": n_workers,
        "n_trajectories": len(trajectories),
        "trajectories": [
            {
                "index": tr.index,
                "seed": list(tr.seed_key),
                "n_clicks": tr.n_clicks,
                "flagged": tr.flagged,
                "truncated_at": tr.truncated_at,
                "final_x": tr.final_x,
                "final_p": tr.final_p,
                "final_energy": tr.final_energy,
            }
            for tr in trajectories
        ],
        "outputs": outputs,
    }
    data = json.dumps(doc, indent=1).encode("ascii")
    _atomic_write(Path(path), data)


def read_manifest(path: str | Path) -> dict:
    with open(path, "r", encoding="ascii") as fh:
        return json.load(fh)


def config_from_manifest(manifest: dict) -> SimConfig:
    return parse_config_text(manifest["config"])


def utc_now() -> str:
    return datetime.now(timezone.utc).isoformat()
