"""
Incremental refinement: swap the training set and keep optimizing the same
parameters (and the same Adam state) for a fixed number of epochs per step.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Any, Callable, Dict, List, Sequence, Tuple

from scoresheet_reader.autodiff.optim import Adam
from scoresheet_reader.errors import ConfigError
from scoresheet_reader.training.trainer import FitResult, TrainConfig, fit, free_running_scores
from scoresheet_reader.utils import Logger


@dataclass
class IncrementalStep:
    note: str
    epochs: int
    dataset: Dict[str, Any] = field(default_factory=dict)  # overrides of the base DatasetSpec

    def __post_init__(self):
        if self.epochs < 1:
            raise ConfigError(f"schedule step {self.note!r} needs at least one epoch")


@dataclass
class IncrementalSchedule:
    steps: List[IncrementalStep]

    def __post_init__(self):
        if not self.steps:
            raise ConfigError("incremental schedule needs at least one step")

    @staticmethod
    def from_dict(data: Dict[str, Any]) -> "IncrementalSchedule":
        unknown = set(data) - {"steps"}
        if unknown:
            raise ConfigError(f"unknown key(s) in [schedule]: {', '.join(sorted(unknown))}")
        steps = []
        for i, raw in enumerate(data.get("steps", [])):
            if not isinstance(raw, dict):
                raise ConfigError(f"schedule step {i} must be a section, got {raw!r}")
            extra = set(raw) - {"note", "epochs", "dataset"}
            if extra:
                raise ConfigError(f"unknown key(s) in schedule step {i}: {', '.join(sorted(extra))}")
            if "epochs" not in raw:
                raise ConfigError(f"schedule step {i} has no epochs")
            try:
                epochs = int(raw["epochs"])
            except (TypeError, ValueError):
                raise ConfigError(f"schedule step {i}: epochs must be an integer, got {raw['epochs']!r}") from None
            steps.append(IncrementalStep(raw.get("note", f"step {i + 1}"), epochs, dict(raw.get("dataset", {}))))
        return IncrementalSchedule(steps)


@dataclass
class StepResult:
    index: int
    note: str
    fit: FitResult
    test_accuracy: float
    first_position_accuracy: float

    def to_dict(self) -> Dict[str, Any]:
        return {"step": self.index, "note": self.note, "epochs": self.fit.epochs_run,
                "test_accuracy": self.test_accuracy, "first_position_accuracy": self.first_position_accuracy}


DataFactory = Callable[[IncrementalStep, int], Tuple[Sequence, Sequence]]


def incremental_fit(model, schedule: IncrementalSchedule, make_data: DataFactory, test_set: Sequence,
                    cfg: TrainConfig, history_for_step: Callable[[int], Any] = None) -> List[StepResult]:
    """Run every step's full epoch budget, scoring the test set after each step."""
    optimizer = Adam(cfg.lr, cfg.beta1, cfg.beta2, cfg.eps)
    results = []
    for index, step in enumerate(schedule.steps, start=1):
        train_set, val_set = make_data(step, index)
        step_cfg = replace(cfg, max_epochs=step.epochs, stop_on_convergence=False)
        history = history_for_step(index) if history_for_step else None
        outcome = fit(model, train_set, val_set, step_cfg, test_set, history, optimizer)
        accuracy, first = free_running_scores(model, test_set, cfg.batch_size)
        Logger.info(f"step {index} ({step.note}): test accuracy {accuracy:.4f}, first position {first:.4f}")
        results.append(StepResult(index, step.note, outcome, accuracy, first))
    return results


__all__ = ["IncrementalSchedule", "IncrementalStep", "StepResult", "incremental_fit"]
