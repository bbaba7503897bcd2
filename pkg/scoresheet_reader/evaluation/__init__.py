"""
Metrics, attention diagnostics and export
"""

from .alignment import AlignmentReport, alignment_hit_rate, attention_entropy, chance_hit_rate
from .evaluate import EvaluationResult, evaluate_model
from .export import export_attention_map, export_curves
from .metrics import MetricsReport, cer, compute_metrics, position_accuracy
