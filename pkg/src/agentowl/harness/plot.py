"""Aggregating per-seed metrics files into plot-ready series."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path
from typing import List, Sequence, Tuple

import numpy as np

from .experiment import read_metrics


@dataclass
class Series:
    steps: np.ndarray
    mean: np.ndarray
    low: np.ndarray
    high: np.ndarray
    n_runs: int

    def to_tsv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, delimiter="\t", lineterminator="\n")
        w.writerow(["env_steps", "mean", "min", "max", "n_runs"])
        for s, m, lo, hi in zip(self.steps, self.mean, self.low, self.high):
            w.writerow([int(s), f"{m:.6f}", f"{lo:g}", f"{hi:g}", self.n_runs])
        return buf.getvalue()


def load_curve(path, column: str = "options_mastered") -> Tuple[np.ndarray, np.ndarray]:
    rows = read_metrics(path)
    steps = np.array([int(r["env_steps"]) for r in rows], dtype=np.int64)
    values = np.array([float(r[column]) for r in rows])
    return steps, values


def carry_forward(steps: np.ndarray, values: np.ndarray, grid: np.ndarray, initial: float = 0.0) -> np.ndarray:
    """Value of the last row at or before each grid step; ``initial`` before the first row."""
    idx = np.searchsorted(steps, grid, side="right") - 1
    out = np.where(idx >= 0, values[np.clip(idx, 0, None)], initial)
    return out.astype(float)


def aggregate(curves: Sequence[Tuple[np.ndarray, np.ndarray]]) -> Series:
    if not curves:
        raise ValueError("no curves to aggregate")
    grid = np.unique(np.concatenate([s for s, _ in curves]))
    stacked = np.stack([carry_forward(s, v, grid) for s, v in curves])
    return Series(grid, stacked.mean(axis=0), stacked.min(axis=0), stacked.max(axis=0), len(curves))


def emit_plot_data(paths: Sequence, out_path=None, column: str = "options_mastered") -> Series:
    series = aggregate([load_curve(p, column) for p in paths])
    if out_path is not None:
        Path(out_path).write_text(series.to_tsv())
    return series
