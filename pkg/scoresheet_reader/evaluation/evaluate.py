"""
Held-out evaluation of an image model: free-running reads scored against
their targets and attention scored against the ink boxes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Sequence

import numpy as np

from scoresheet_reader.core.vocabulary import Vocabulary
from scoresheet_reader.errors import DataError
from scoresheet_reader.evaluation.alignment import AlignmentReport, alignment_hit_rate, chance_hit_rate, combine_reports
from scoresheet_reader.evaluation.metrics import MetricsReport, compute_metrics
from scoresheet_reader.model.network import ScoresheetModel
from scoresheet_reader.utils import Logger


@dataclass
class EvaluationResult:
    metrics: MetricsReport
    alignment: AlignmentReport
    chance_hit_rate: float
    predictions: List[List[int]] = field(default_factory=list)
    attention: List[np.ndarray] = field(default_factory=list)  # (T, L) per sample

    def to_dict(self) -> Dict[str, object]:
        data = self.metrics.to_dict()
        data.update({f"alignment_{k}": v for k, v in self.alignment.to_dict().items()})
        data["chance_hit_rate"] = self.chance_hit_rate
        return data


def evaluate_model(model: ScoresheetModel, samples: Sequence, vocabulary: Vocabulary, tolerance: float = 0.0,
                   batch_size: int = 16) -> EvaluationResult:
    if not samples:
        raise DataError("cannot evaluate on an empty sample set")
    geometry = model.config.grid
    predictions, attention, reports = [], [], []
    for start in range(0, len(samples), batch_size):
        chunk = samples[start:start + batch_size]
        batch = model.collate(chunk)
        result = model.forward_free_running(batch.images, model.config.max_decode_len, run_all_steps=True)
        for i, sample in enumerate(chunk):
            predictions.append(result.predictions[i])
            weights = result.attention.sample(i)
            attention.append(weights)
            reports.append(alignment_hit_rate(weights, sample.bboxes, geometry, tolerance))

    def tokens(codes):
        return [vocabulary.token_of(c) for c in codes]

    metrics = compute_metrics([tokens(p) for p in predictions], [tokens(s.codes) for s in samples])
    alignment = combine_reports(reports)
    chance = float(np.mean([chance_hit_rate(s.bboxes, geometry, tolerance) for s in samples]))
    Logger.info(f"Evaluated {metrics.sample_count} samples: accuracy {metrics.position_accuracy:.4f}, "
                f"hit rate {alignment.hit_rate:.4f} (chance {chance:.4f})")
    return EvaluationResult(metrics, alignment, chance, predictions, attention)


__all__ = ["EvaluationResult", "evaluate_model"]
