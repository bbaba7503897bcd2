"""
Incremental refinement runs: each schedule step renders a fresh training set
from the base dataset spec plus the step's overrides, and keeps training the
same model on it.
"""

from __future__ import annotations

from dataclasses import replace
from pathlib import Path
from typing import Any, Dict, List

from scoresheet_reader.experiments.common import (CHECKPOINT_FILE, VOCABULARY_FILE, RunContext,
                                                  dataset_spec)
from scoresheet_reader.model.checkpoint import save_checkpoint
from scoresheet_reader.services.managers import RESOLVED_CONFIG_FILE, CurveHistory
from scoresheet_reader.synth.dataset import derive_seed
from scoresheet_reader.training.incremental import IncrementalSchedule, IncrementalStep, StepResult, incremental_fit
from scoresheet_reader.training.trainer import split_dataset
from scoresheet_reader.utils import FileManager, Logger
from scoresheet_reader.utils.paths import ensure_dir

STEPS_FILE = "steps.csv"
STEP_DATA_STREAM = 20


def run_incremental(cfg: Dict[str, Any], out_dir=None, jobs: int = 1) -> List[StepResult]:
    context = RunContext(cfg)
    schedule = IncrementalSchedule.from_dict(cfg["schedule"])
    train_cfg = context.train_config()
    test_set = context.generate(context.test_spec, jobs)
    model = context.build_model()
    master = int(cfg["seed"])

    def make_data(step: IncrementalStep, index: int):
        spec = dataset_spec(cfg, **step.dataset)
        spec = replace(spec, seed=derive_seed(master, STEP_DATA_STREAM, index))
        Logger.info(f"Step {index} ({step.note}): rendering {spec.size} samples")
        samples = context.generate(spec, jobs)
        if train_cfg.val_fraction > 0:
            return split_dataset(samples, train_cfg.fractions, derive_seed(master, STEP_DATA_STREAM + 1, index))
        return samples, []

    def history_for_step(index: int):
        return CurveHistory(Path(out_dir) / f"step_{index}" if out_dir is not None else None)

    results = incremental_fit(model, schedule, make_data, test_set, train_cfg, history_for_step)
    if out_dir is not None:
        out_dir = ensure_dir(out_dir)
        FileManager.save_json(cfg, out_dir / RESOLVED_CONFIG_FILE)
        context.vocabulary.save(out_dir / VOCABULARY_FILE)
        save_checkpoint(model, out_dir / CHECKPOINT_FILE, context.vocabulary.digest())
        FileManager.save_csv(("step", "note", "epochs", "test_accuracy", "first_position_accuracy"),
                             [(r.index, r.note, r.fit.epochs_run, f"{r.test_accuracy:.9g}",
                               f"{r.first_position_accuracy:.9g}") for r in results],
                             out_dir / STEPS_FILE)
    return results


__all__ = ["run_incremental"]
