"""Parallel orchestration and on-disk formats."""

import json
from pathlib import Path

import numpy as np
import pytest

from phasemc.config import SimConfig
from phasemc.ensemble import (
    read_clicks,
    read_manifest,
    run_ensemble,
    write_clicks,
    write_manifest,
    utc_now,
)

TINY = SimConfig(t_final=1.5, n_traj=6, master_seed=777)


@pytest.fixture(scope="module")
def tiny_ensemble():
    return run_ensemble(TINY, n_workers=1)


class TestRunEnsemble:
    def test_ordered_and_complete(self, tiny_ensemble):
        assert [tr.index for tr in tiny_ensemble] == list(range(6))

    def test_worker_count_invariance(self, tiny_ensemble):
        parallel = run_ensemble(TINY, n_workers=3)
        for a, b in zip(tiny_ensemble, parallel):
            assert np.array_equal(a.times, b.times)
            assert np.array_equal(a.js, b.js)
            assert np.array_equal(a.ks, b.ks)
            assert a.final_energy == b.final_energy

    def test_keep_states(self):
        cfg = TINY.replace(n_traj=2, t_final=0.2)
        trs = run_ensemble(cfg, n_workers=2, keep_states=True)
        for tr in trs:
            assert tr.final_amplitudes is not None
            assert tr.final_amplitudes.shape == (cfg.n_points,)


class TestClicksFile:
    def test_round_trip(self, tiny_ensemble, tmp_path):
        path = tmp_path / "clicks.csv"
        write_clicks(path, TINY, tiny_ensemble)
        file_hash, records = read_clicks(path)
        assert file_hash == TINY.config_hash()
        originals = {tr.index: tr for tr in tiny_ensemble if tr.n_clicks}
        assert {r.index for r in records} == set(originals)
        for rec in records:
            orig = originals[rec.index]
            assert np.array_equal(rec.times, orig.times)
            assert np.array_equal(rec.js, orig.js)
            assert np.array_equal(rec.x, orig.x)

    def test_byte_identical_rewrites(self, tiny_ensemble, tmp_path):
        p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
        h1 = write_clicks(p1, TINY, tiny_ensemble)
        h2 = write_clicks(p2, TINY, tiny_ensemble)
        assert h1 == h2
        assert p1.read_bytes() == p2.read_bytes()

    def test_header_required(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("not,a,header\n1,2,3,4,5,6\n")
        from phasemc.errors import ConfigError

        with pytest.raises(ConfigError):
            read_clicks(bad)

    def test_no_partial_files_left(self, tiny_ensemble, tmp_path):
        path = tmp_path / "c.csv"
        write_clicks(path, TINY, tiny_ensemble)
        assert [p.name for p in tmp_path.iterdir()] == ["c.csv"]


class TestManifest:
    def test_contents(self, tiny_ensemble, tmp_path):
        path = tmp_path / "manifest.json"
        write_manifest(
            path, TINY, tiny_ensemble, {"clicks.csv": "ab" * 32},
            started_utc=utc_now(), finished_utc=utc_now(), n_workers=2,
        )
        doc = read_manifest(path)
        assert doc["config_hash"] == TINY.config_hash()
        assert doc["n_trajectories"] == 6
        assert doc["trajectories"][0]["seed"] == [777, 0]
        assert "clicks.csv" in doc["outputs"]
        # the embedded config reproduces the run
        from phasemc.ensemble import config_from_manifest

        assert config_from_manifest(doc) == TINY

    def test_json_is_plain_ascii(self, tiny_ensemble, tmp_path):
        path = tmp_path / "m.json"
        write_manifest(path, TINY, tiny_ensemble, {}, utc_now(), utc_now(), 1)
        json.loads(path.read_text(encoding="ascii"))
