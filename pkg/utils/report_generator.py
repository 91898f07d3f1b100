"""
report_generator.py
───────────────────
Persist experiment reports as run directories and read them back.

Layout of results/<run-id>/ (run-id = UTC timestamp + config-hash prefix):
  config.json            resolved RunConfig (canonical JSON)
  summary.json           verdicts, fitted constants, curve files, seed, config_hash
  manifest.json          sha256 of every written artifact, plus the config hash
  curves/*.csv           one CSV per recorded curve
  curves/*.svg           optional line charts (--svg)
  profiles/*.csv/.json   position,value pairs with a grid sidecar
  snapshots/*.bin        lattice states, JSON header + little-endian float64
  ABORTED                present when the run stopped on a compute error
"""

import hashlib
import json
import logging
import os
import struct
from datetime import datetime, timezone
from typing import Any, Dict, List, Optional, Sequence, Tuple

import matplotlib
import numpy as np
import pandas as pd

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from config.settings import run_settings
from core.exceptions import ConfigError
from core.models import ExperimentReport, LatticeState, RunConfig, WaveProfile

logger = logging.getLogger(__name__)

# Fields that decide where and how fast a run goes, not what it computes
HASH_EXCLUDED = ("out_dir", "workers", "report_dir", "svg")
ABORTED_MARKER = "ABORTED"
SNAPSHOT_MAGIC = b"LATSNAP1"


def canonical_json(data: Any) -> str:
    return json.dumps(data, sort_keys=True, separators=(",", ":"), allow_nan=True)


def config_payload(config: RunConfig) -> Dict[str, Any]:
    return config.model_dump(mode="json", by_alias=True, exclude=set(HASH_EXCLUDED))


def config_hash(config: RunConfig) -> str:
    """sha256 of the canonical JSON of everything that influences the numbers."""
    return hashlib.sha256(canonical_json(config_payload(config)).encode()).hexdigest()


def run_id(config: RunConfig, now: Optional[datetime] = None) -> str:
    stamp = (now or datetime.now(timezone.utc)).strftime("%Y%m%dT%H%M%SZ")
    return f"{stamp}-{config_hash(config)[:12]}"


def _file_digest(path: str) -> str:
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()


def _slug(text: str) -> str:
    return "".join(ch if ch.isalnum() or ch in "-_." else "_" for ch in text)


class ReportGenerator:
    """Write one run directory and the artifacts of its experiment reports."""

    def __init__(self, config: RunConfig, output_dir: Optional[str] = None, now: Optional[datetime] = None):
        """
        Args:
            config: the resolved run configuration
            output_dir: parent directory (defaults to config.out_dir)
            now: timestamp used for the run-id (defaults to the current UTC time)
        """
        self.config = config
        self.config_hash = config_hash(config)
        self.run_dir = os.path.join(output_dir or config.out_dir, run_id(config, now))
        self.created_at = (now or datetime.now(timezone.utc)).isoformat()
        self.files: List[str] = []
        os.makedirs(self.run_dir, exist_ok=True)

    def _path(self, *parts: str) -> str:
        path = os.path.join(self.run_dir, *parts)
        os.makedirs(os.path.dirname(path), exist_ok=True)
        return path

    def _relative(self, path: str) -> str:
        rel = os.path.relpath(path, self.run_dir).replace(os.sep, "/")
        self.files.append(rel)
        return rel

    # ─────────────────────────────────────
    # 1. TABULAR DATA
    # ─────────────────────────────────────

    def save_curve(self, rows: Sequence[Dict[str, Any]], filename: str) -> Optional[str]:
        """
        Save one curve to curves/<filename>.csv

        Args:
            rows: list of dictionaries with identical keys
            filename: stem of the CSV file

        Returns:
            Path relative to the run directory, or None for an empty curve
        """
        if not rows:
            return None
        path = self._path("curves", f"{_slug(filename)}.csv")
        frame = pd.DataFrame(list(rows))
        frame.to_csv(path, index=False, float_format=run_settings.csv_float_format, lineterminator="\n")
        return self._relative(path)

    def save_chart(self, rows: Sequence[Dict[str, Any]], filename: str, title: str = "") -> Optional[str]:
        """Line chart of every numeric column against the first one, as SVG."""
        frame = pd.DataFrame(list(rows))
        numeric = frame.select_dtypes(include="number")
        if numeric.shape[1] < 2 or numeric.shape[0] < 2:
            return None
        matplotlib.rcParams["svg.hashsalt"] = self.config_hash
        x_name = numeric.columns[0]
        fig, ax = plt.subplots(figsize=(7.0, 4.0))
        for column in numeric.columns[1:]:
            values = numeric[column].to_numpy(dtype=float)
            if np.all(np.isfinite(values)) and np.all(values > 0.0):
                ax.semilogy(numeric[x_name], values, label=column)
            else:
                ax.plot(numeric[x_name], values, label=column)
        ax.set_xlabel(x_name)
        ax.set_title(title or filename)
        ax.legend(fontsize="small")
        path = self._path("curves", f"{_slug(filename)}.svg")
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
        return self._relative(path)

    # ─────────────────────────────────────
    # 2. PROFILES AND SNAPSHOTS
    # ─────────────────────────────────────

    def save_profile(self, profile: WaveProfile, filename: str) -> str:
        """position,value CSV plus a JSON sidecar describing the grid."""
        stem = _slug(filename)
        path = self._path("profiles", f"{stem}.csv")
        pd.DataFrame({"position": profile.nodes, "value": profile.values}).to_csv(
            path, index=False, float_format=run_settings.csv_float_format, lineterminator="\n")
        sidecar = self._path("profiles", f"{stem}.json")
        with open(sidecar, "w", newline="\n") as fh:
            json.dump({"n_points": profile.grid.n_points, "half_width": profile.grid.half_width,
                       "variable_tag": profile.variable_tag.value, "parity": profile.parity.value,
                       "config_hash": self.config_hash}, fh, indent=2, sort_keys=True)
        self._relative(sidecar)
        return self._relative(path)

    def save_snapshot(self, state: LatticeState, filename: str) -> str:
        path = self._path("snapshots", f"{_slug(filename)}.bin")
        write_snapshot(path, state, self.config_hash)
        return self._relative(path)

    # ─────────────────────────────────────
    # 3. RUN DIRECTORY
    # ─────────────────────────────────────

    def save_report(self, report: ExperimentReport) -> ExperimentReport:
        """Write the report's curves, profiles and snapshots; returns it with curve_files filled."""
        report.config_hash = self.config_hash
        curve_files = []
        for name, rows in report.curves.items():
            rel = self.save_curve(rows, f"{report.name}_{name}")
            if rel is None:
                continue
            curve_files.append(rel)
            if self.config.svg:
                chart = self.save_chart(rows, f"{report.name}_{name}", title=f"{report.name}: {name}")
                if chart:
                    curve_files.append(chart)
        for name, item in report.profiles.items():
            if isinstance(item, WaveProfile):
                curve_files.append(self.save_profile(item, f"{report.name}_{name}"))
            elif isinstance(item, LatticeState):
                curve_files.append(self.save_snapshot(item, f"{report.name}_{name}"))
        report.curve_files = curve_files
        return report

    def write_summary(self, reports: Sequence[ExperimentReport], aborted: Optional[str] = None) -> str:
        """config.json, summary.json and manifest.json; ABORTED when `aborted` carries a message."""
        config_path = self._path("config.json")
        with open(config_path, "w", newline="\n") as fh:
            fh.write(canonical_json(config_payload(self.config)) + "\n")
        self._relative(config_path)

        summary = {
            "name": self.config.subcommand.value,
            "params": config_payload(self.config),
            "verdicts": [v.model_dump(by_alias=True) for r in reports for v in r.verdicts],
            "curve_files": [f for r in reports for f in r.curve_files],
            "seed": self.config.seed,
            "config_hash": self.config_hash,
            "created_at": self.created_at,
            "all_passed": all(r.all_passed for r in reports) and aborted is None,
            "experiments": [r.model_dump(mode="json", by_alias=True, exclude={"verdicts", "curve_files"})
                            for r in reports],
        }
        summary_path = self._path("summary.json")
        with open(summary_path, "w", newline="\n") as fh:
            json.dump(summary, fh, indent=2, sort_keys=True, default=_json_default)
            fh.write("\n")
        self._relative(summary_path)

        if aborted is not None:
            marker = self._path(ABORTED_MARKER)
            with open(marker, "w", newline="\n") as fh:
                fh.write(aborted + "\n")
            self._relative(marker)

        manifest_path = self._path("manifest.json")
        manifest = {"config_hash": self.config_hash,
                    "files": {rel: _file_digest(os.path.join(self.run_dir, rel)) for rel in sorted(set(self.files))}}
        with open(manifest_path, "w", newline="\n") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")
        logger.info(f"wrote {len(manifest['files'])} artifacts to {self.run_dir}")
        return self.run_dir


def _json_default(value: Any) -> Any:
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    return str(value)


# ─────────────────────────────────────
# 4. BINARY SNAPSHOTS
# ─────────────────────────────────────

def write_snapshot(path: str, state: LatticeState, hash_value: str = "") -> None:
    """magic, uint32 header length, JSON header, then w and p as little-endian float64."""
    header = canonical_json({"n_sites": state.n_sites, "t": state.t, "config_hash": hash_value,
                             "dtype": "<f8", "arrays": ["w", "p"]}).encode()
    with open(path, "wb") as fh:
        fh.write(SNAPSHOT_MAGIC)
        fh.write(struct.pack("<I", len(header)))
        fh.write(header)
        fh.write(np.asarray(state.w, dtype="<f8").tobytes())
        fh.write(np.asarray(state.p, dtype="<f8").tobytes())


def read_snapshot(path: str) -> Tuple[LatticeState, Dict[str, Any]]:
    with open(path, "rb") as fh:
        if fh.read(len(SNAPSHOT_MAGIC)) != SNAPSHOT_MAGIC:
            raise ValueError(f"{path} is not a lattice snapshot")
        (length,) = struct.unpack("<I", fh.read(4))
        header = json.loads(fh.read(length))
        n = header["n_sites"]
        data = np.frombuffer(fh.read(16 * n), dtype="<f8")
    return LatticeState(data[:n].copy(), data[n:].copy(), header["t"]), header


# ─────────────────────────────────────
# 5. READING RUNS BACK
# ─────────────────────────────────────

def load_summary(run_dir: str) -> Dict[str, Any]:
    """
    summary.json of a run directory, after checking every artifact against the manifest.

    Raises ConfigError (key "config_hash") when the stored config, the summary,
    the run-id or any artifact digest disagree.
    """
    try:
        with open(os.path.join(run_dir, "summary.json")) as fh:
            summary = json.load(fh)
        with open(os.path.join(run_dir, "manifest.json")) as fh:
            manifest = json.load(fh)
        with open(os.path.join(run_dir, "config.json")) as fh:
            stored = json.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"{run_dir} is not a complete run directory: {exc}", key="dir") from exc

    recomputed = hashlib.sha256(canonical_json(stored).encode()).hexdigest()
    expected = summary.get("config_hash", "")
    if recomputed != expected or manifest.get("config_hash") != expected:
        raise ConfigError(f"config hash mismatch in {run_dir}: summary {expected[:12]}, "
                          f"config {recomputed[:12]}", key="config_hash")
    if not os.path.basename(os.path.normpath(run_dir)).endswith(expected[:12]):
        raise ConfigError(f"run directory name does not carry hash prefix {expected[:12]}", key="config_hash")
    for rel, digest in manifest.get("files", {}).items():
        path = os.path.join(run_dir, rel)
        if not os.path.exists(path) or _file_digest(path) != digest:
            raise ConfigError(f"artifact {rel} does not match the manifest", key="config_hash")
    summary["aborted"] = os.path.exists(os.path.join(run_dir, ABORTED_MARKER))
    return summary


def verdict_table(summary: Dict[str, Any]) -> str:
    """Human-readable verdict table of one summary."""
    frame = pd.DataFrame([{
        "criterion": v["criterion"],
        "result": "PASS" if v["pass"] else "FAIL",
        "measured": "-" if v.get("measured") is None else f"{v['measured']:.4g}",
        "tolerance": "-" if v.get("tolerance") is None else f"{v['tolerance']:.4g}",
    } for v in summary.get("verdicts", [])], columns=["criterion", "result", "measured", "tolerance"])
    passed = int((frame["result"] == "PASS").sum()) if not frame.empty else 0
    lines = [
        f"run        : {summary.get('name', '?')}  (config {summary.get('config_hash', '')[:12]}, "
        f"seed {summary.get('seed')})",
        f"verdicts   : {passed}/{len(frame)} passed" + ("  [ABORTED]" if summary.get("aborted") else ""),
        "",
        frame.to_string(index=False) if not frame.empty else "(no verdicts)",
    ]
    return "\n".join(lines)
