"""
tests/test_report_generator.py
──────────────────────────────
Tests for run directories: config hashing, curve and profile files,
binary snapshots, summary/manifest writing and the hash check on reload.
"""

import json
import os
import sys
from datetime import datetime, timezone

import numpy as np
import pandas as pd
import pytest

sys.path.insert(0, os.path.join(os.path.dirname(__file__), ".."))

from core.exceptions import ConfigError
from core.models import ExperimentReport, LatticeState, ModelParams, RunConfig, Subcommand, VariableTag
from utils.report_generator import (
    ABORTED_MARKER, ReportGenerator, config_hash, load_summary, read_snapshot, run_id, verdict_table,
    write_snapshot,
)
from utils.spectral import make_grid, profile_from_function

NOW = datetime(2026, 1, 2, 3, 4, 5, tzinfo=timezone.utc)


def _report() -> ExperimentReport:
    report = ExperimentReport(name="wave", seed=42)
    report.add_verdict("wave.fixed_point_residual", True, 3e-12, 1e-10)
    report.add_verdict("wave.oracle_agreement", False, 2e-7, 1e-8, note="loose")
    report.fitted_slopes["err_k0"] = 0.21
    report.curves["sweep"] = [{"epsilon": 0.05, "err": 0.1}, {"epsilon": 0.1, "err": 0.2},
                              {"epsilon": 0.2, "err": 0.3}]
    grid = make_grid(64, 8.0)
    report.profiles["strain"] = profile_from_function(grid, lambda z: np.exp(-z ** 2), VariableTag.Z_SCALE)
    report.profiles["final_state"] = LatticeState(np.linspace(-0.1, 0.1, 8), np.zeros(8), 12.5)
    return report


def _write_run(parent, config=None, aborted=None):
    config = config or RunConfig()
    generator = ReportGenerator(config, output_dir=str(parent), now=NOW)
    return generator.write_summary([generator.save_report(_report())], aborted=aborted)


class TestConfigHash:
    """Hash and run-id"""

    def test_deterministic(self):
        """Test equal configs hash equally"""
        assert config_hash(RunConfig()) == config_hash(RunConfig())
        assert len(config_hash(RunConfig())) == 64

    def test_output_fields_excluded(self):
        """Test output location and worker count leave the hash alone"""
        base = config_hash(RunConfig())
        assert config_hash(RunConfig(out_dir="elsewhere", workers=4, svg=True)) == base

    def test_numbers_included(self):
        """Test the seed and the model change the hash"""
        base = config_hash(RunConfig())
        assert config_hash(RunConfig(seed=7)) != base
        assert config_hash(RunConfig(model=ModelParams(epsilon=0.2))) != base

    def test_run_id(self):
        """Test the run-id is a UTC stamp plus the hash prefix"""
        config = RunConfig()
        assert run_id(config, NOW) == f"20260102T030405Z-{config_hash(config)[:12]}"


class TestArtifacts:
    """Curves, profiles and snapshots"""

    def test_save_curve(self, tmp_path):
        """Test a curve becomes a CSV with one column per key"""
        generator = ReportGenerator(RunConfig(), output_dir=str(tmp_path), now=NOW)
        rel = generator.save_curve([{"t": 0.0, "err": 1e-3}, {"t": 10.0, "err": 2e-3}], "stability delta")
        assert rel == "curves/stability_delta.csv"
        frame = pd.read_csv(os.path.join(generator.run_dir, rel))
        assert list(frame.columns) == ["t", "err"]
        assert frame["err"].tolist() == pytest.approx([1e-3, 2e-3], rel=1e-15)
        assert generator.save_curve([], "empty") is None

    def test_profile_sidecar(self, tmp_path):
        """Test a profile is written with its grid description"""
        generator = ReportGenerator(RunConfig(), output_dir=str(tmp_path), now=NOW)
        profile = _report().profiles["strain"]
        rel = generator.save_profile(profile, "strain")
        frame = pd.read_csv(os.path.join(generator.run_dir, rel))
        np.testing.assert_allclose(frame["value"].to_numpy(), profile.values, rtol=1e-15)
        with open(os.path.join(generator.run_dir, "profiles", "strain.json")) as fh:
            sidecar = json.load(fh)
        assert sidecar["n_points"] == 64 and sidecar["variable_tag"] == VariableTag.Z_SCALE.value

    def test_snapshot_round_trip(self, tmp_path):
        """Test a lattice state survives the binary format bit for bit"""
        state = LatticeState(np.array([0.1, -0.2, 1.0 / 3.0]), np.array([np.pi, 0.0, -1e-300]), 7.25)
        path = str(tmp_path / "state.bin")
        write_snapshot(path, state, "abc")
        loaded, header = read_snapshot(path)
        np.testing.assert_array_equal(loaded.w, state.w)
        np.testing.assert_array_equal(loaded.p, state.p)
        assert loaded.t == 7.25
        assert header["config_hash"] == "abc" and header["dtype"] == "<f8"

    def test_snapshot_magic(self, tmp_path):
        """Test other files are refused"""
        path = tmp_path / "other.bin"
        path.write_bytes(b"not a snapshot at all")
        with pytest.raises(ValueError):
            read_snapshot(str(path))

    def test_svg_deterministic(self, tmp_path):
        """Test the same rows give byte-identical charts"""
        rows = _report().curves["sweep"]
        first = ReportGenerator(RunConfig(), output_dir=str(tmp_path / "a"), now=NOW)
        second = ReportGenerator(RunConfig(), output_dir=str(tmp_path / "b"), now=NOW)
        rel = first.save_chart(rows, "sweep")
        assert rel == second.save_chart(rows, "sweep") == "curves/sweep.svg"
        with open(os.path.join(first.run_dir, rel), "rb") as a, open(os.path.join(second.run_dir, rel), "rb") as b:
            assert a.read() == b.read()


class TestRunDirectory:
    """summary.json, manifest.json and reloading"""

    def test_layout(self, tmp_path):
        """Test the run directory holds config, summary, manifest and every artifact"""
        run_dir = _write_run(tmp_path)
        for name in ("config.json", "summary.json", "manifest.json", "curves/wave_sweep.csv",
                     "profiles/wave_strain.csv", "snapshots/wave_final_state.bin"):
            assert os.path.exists(os.path.join(run_dir, name)), name
        assert not os.path.exists(os.path.join(run_dir, ABORTED_MARKER))

    def test_summary_contents(self, tmp_path):
        """Test verdicts, curve files, seed and hash reach the summary"""
        summary = load_summary(_write_run(tmp_path))
        assert summary["config_hash"] == config_hash(RunConfig())
        assert summary["seed"] == 42
        assert [v["pass"] for v in summary["verdicts"]] == [True, False]
        assert "curves/wave_sweep.csv" in summary["curve_files"]
        assert summary["all_passed"] is False
        assert summary["aborted"] is False
        assert summary["experiments"][0]["fitted_slopes"]["err_k0"] == 0.21

    def test_summary_deterministic(self, tmp_path):
        """Test two identical runs write byte-identical summaries"""
        first = _write_run(tmp_path / "a")
        second = _write_run(tmp_path / "b")
        with open(os.path.join(first, "summary.json"), "rb") as a, open(os.path.join(second, "summary.json"), "rb") as b:
            assert a.read() == b.read()

    def test_aborted_marker(self, tmp_path):
        """Test an aborted run is flagged and never passes"""
        summary = load_summary(_write_run(tmp_path, aborted="guard crossed at t = 12"))
        assert summary["aborted"] is True
        assert summary["all_passed"] is False
        assert "[ABORTED]" in verdict_table(summary)

    def test_refuses_edited_config(self, tmp_path):
        """Test a config that no longer matches the stored hash is refused"""
        run_dir = _write_run(tmp_path)
        path = os.path.join(run_dir, "config.json")
        with open(path) as fh:
            stored = json.load(fh)
        stored["seed"] = 43
        with open(path, "w") as fh:
            json.dump(stored, fh)
        with pytest.raises(ConfigError) as info:
            load_summary(run_dir)
        assert info.value.key == "config_hash"

    def test_refuses_edited_artifact(self, tmp_path):
        """Test a curve file changed after the run is refused"""
        run_dir = _write_run(tmp_path)
        with open(os.path.join(run_dir, "curves", "wave_sweep.csv"), "a") as fh:
            fh.write("0.3,0.4\n")
        with pytest.raises(ConfigError) as info:
            load_summary(run_dir)
        assert info.value.key == "config_hash"

    def test_refuses_incomplete_directory(self, tmp_path):
        """Test a directory without a summary is refused"""
        with pytest.raises(ConfigError) as info:
            load_summary(str(tmp_path))
        assert info.value.key == "dir"

    def test_verdict_table(self, tmp_path):
        """Test the table lists every criterion with its outcome"""
        table = verdict_table(load_summary(_write_run(tmp_path)))
        assert "1/2 passed" in table
        assert "wave.oracle_agreement" in table and "FAIL" in table
        assert Subcommand.WAVE.value in table
