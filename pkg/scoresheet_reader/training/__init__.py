"""
Training loop and incremental refinement
"""

from .incremental import IncrementalSchedule, IncrementalStep, StepResult, incremental_fit
from .trainer import (
    EpochStats,
    FitResult,
    TrainConfig,
    evaluate_loss,
    fit,
    free_running_scores,
    split_dataset,
    train_epoch,
)
