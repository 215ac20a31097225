"""Readers for harness output files (summary JSON, run CSVs, shift reports).

This package talks to the simulator only through these files.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import yaml

RUN_COLUMNS = [
    "run_id", "seed", "t", "episode", "level_m", "replay_depth",
    "n_active_arms", "arm", "reward", "regret_instant", "regret_cum",
]


class CrossCheckError(RuntimeError):
    """A figure annotation disagreed with its re-derivation from raw rows."""


@dataclass
class RunData:
    run_id: str
    t: np.ndarray
    episode: np.ndarray
    regret_instant: np.ndarray
    regret_cum: np.ndarray


@dataclass
class SummaryData:
    name: str
    path: Path
    rows: list[dict]
    aggregates: list[dict]
    fit: dict | None

    def runs_dir(self) -> Path:
        return self.path.parent / "runs"

    def horizons(self) -> list[int]:
        return sorted({r["T"] for r in self.rows})


def load_summary(path: str | Path) -> SummaryData:
    path = Path(path)
    doc = json.loads(path.read_text())
    for key in ("name", "rows", "aggregates"):
        if key not in doc:
            raise ValueError(f"{path}: not a harness summary (missing {key!r})")
    return SummaryData(
        name=doc["name"], path=path, rows=doc["rows"],
        aggregates=doc["aggregates"], fit=doc.get("fit"),
    )


def load_run(path: str | Path) -> RunData:
    path = Path(path)
    with open(path) as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != RUN_COLUMNS:
            raise ValueError(f"{path}: unexpected run CSV columns {header}")
        t, episode, inst, cum = [], [], [], []
        run_id = None
        for row in reader:
            run_id = row[0]
            t.append(int(row[2]))
            episode.append(int(row[3]))
            inst.append(float(row[9]))
            cum.append(float(row[10]))
    if run_id is None:
        raise ValueError(f"{path}: empty run file")
    return RunData(
        run_id=run_id,
        t=np.asarray(t),
        episode=np.asarray(episode),
        regret_instant=np.asarray(inst),
        regret_cum=np.asarray(cum),
    )


def load_runs_for_summary(summary: SummaryData, T: int | None = None) -> list[tuple[dict, RunData]]:
    """(summary row, run data) pairs, optionally restricted to one horizon."""
    out = []
    for row in summary.rows:
        if T is not None and row["T"] != T:
            continue
        csv_path = summary.runs_dir() / f"{row['run_id']}.csv"
        if not csv_path.exists():
            raise FileNotFoundError(f"run file {csv_path} referenced by the summary is missing")
        out.append((row, load_run(csv_path)))
    if not out:
        raise ValueError(f"summary {summary.name}: no runs at horizon {T}")
    return out


def load_shift_times(path: str | Path) -> list[int]:
    doc = yaml.safe_load(Path(path).read_text())
    if doc.get("format") != "driftbandit-shifts":
        raise ValueError(f"{path}: not a shift report")
    return [s["time"] for s in doc.get("shifts", [])]
