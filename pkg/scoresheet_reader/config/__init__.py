"""
Config package for Scoresheet Reader
"""

from .presets import (
    ABLATION_FACTORS,
    DESK_PRESET,
    PAPER_PRESET,
    PRESETS,
    dataclass_from_dict,
    get_optimal_jobs,
    get_preset,
)
