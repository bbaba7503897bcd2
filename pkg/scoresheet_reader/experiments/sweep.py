"""
Sequence length x training-set size sweep.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

from scoresheet_reader.config.presets import dataclass_from_dict
from scoresheet_reader.errors import ConfigError
from scoresheet_reader.experiments.common import RunSummary, run_many
from scoresheet_reader.utils import FileManager, Logger
from scoresheet_reader.utils.paths import ensure_dir

SWEEP_FILE = "sweep.csv"
SWEEP_COLUMNS = ("length", "size", "seed", "status", "train_acc", "val_acc", "test_acc", "hit_rate", "max_gap",
                 "error")


@dataclass
class SweepSpec:
    lengths: List[int] = field(default_factory=lambda: [4, 8, 12, 16])
    sizes: List[int] = field(default_factory=lambda: [250, 500, 1000, 2000])
    seeds: List[int] = field(default_factory=lambda: [0, 1, 2])
    rows: int = 8
    vocab_cap: int = 0

    def __post_init__(self):
        if not self.lengths or not self.sizes or not self.seeds:
            raise ConfigError("sweep needs at least one length, size and seed")
        if min(self.lengths) < 1 or min(self.sizes) < 1:
            raise ConfigError("sweep lengths and sizes must be positive")
        if max(self.lengths) > 2 * self.rows:
            raise ConfigError(f"length {max(self.lengths)} exceeds the {2 * self.rows} cells of {self.rows} rows")

    @staticmethod
    def from_dict(data: Dict[str, Any]) -> "SweepSpec":
        return dataclass_from_dict(SweepSpec, data, "sweep")


@dataclass
class SweepRow:
    length: int
    size: int
    summary: RunSummary

    def cells(self):
        s = self.summary

        def fmt(value):
            return "" if value is None else f"{value:.9g}"

        return (self.length, self.size, s.seed, s.status, fmt(s.final_train_acc), fmt(s.final_val_acc),
                fmt(s.test_accuracy), fmt(s.hit_rate), fmt(s.max_gap), s.error)


def sweep_config(base: Dict[str, Any], spec: SweepSpec, length: int, size: int, seed: int) -> Dict[str, Any]:
    cfg = copy.deepcopy(base)
    cfg["seed"] = int(seed)
    cfg["dataset"].update({"length": int(length), "size": int(size), "rows": spec.rows})
    # One vocabulary for the whole sweep, covering the longest sequences.
    cfg["corpus"].update({"positions": max(spec.lengths), "vocab_cap": spec.vocab_cap})
    cfg["model"]["max_decode_len"] = 0
    return cfg


def run_length_sweep(base: Dict[str, Any], spec: SweepSpec, out_dir=None, jobs: int = 1) -> List[SweepRow]:
    grid = [(length, size, seed) for length in spec.lengths for size in spec.sizes for seed in spec.seeds]
    tasks = []
    for length, size, seed in grid:
        run_dir: Optional[Path] = None
        if out_dir is not None:
            run_dir = Path(out_dir) / f"len{length}_size{size}_seed{seed}"
        tasks.append((f"len{length}_size{size}", sweep_config(base, spec, length, size, seed), run_dir))
    Logger.info(f"Length sweep: {len(tasks)} runs on {jobs} worker(s)")
    summaries = run_many(tasks, jobs)
    rows = [SweepRow(length, size, s) for (length, size, _), s in zip(grid, summaries)]
    if out_dir is not None:
        FileManager.save_csv(SWEEP_COLUMNS, [r.cells() for r in rows], ensure_dir(out_dir) / SWEEP_FILE)
    return rows


def gap_by_length(rows: Sequence[SweepRow], size: int) -> Dict[int, float]:
    """Mean max val-train gap per length at one training size, over finished runs."""
    gaps: Dict[int, List[float]] = {}
    for r in rows:
        if r.size == size and r.summary.status == "ok" and r.summary.max_gap is not None:
            gaps.setdefault(r.length, []).append(r.summary.max_gap)
    return {length: sum(v) / len(v) for length, v in sorted(gaps.items())}


__all__ = ["SWEEP_COLUMNS", "SweepRow", "SweepSpec", "gap_by_length", "run_length_sweep", "sweep_config"]
