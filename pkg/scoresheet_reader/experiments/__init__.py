"""
Experiment drivers: single runs, factor ablations, length sweeps,
incremental schedules and the predictability baseline
"""

from .ablation import AblationResult, AblationSuite, ablation_config, config_diff, evaluate_directions, run_ablation
from .baseline import BaselineSpec, DecoderOnlyModel, recognition_lift, run_predictability_baseline
from .common import RunContext, RunSummary, run_many, run_training
from .incremental import run_incremental
from .sweep import SweepSpec, run_length_sweep
