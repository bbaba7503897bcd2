"""
Sequence metrics.

Accuracy over a set is position-weighted (total correct positions over total
target positions). CER is the Levenshtein distance between the space-joined
token strings divided by the length of the joined target.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Dict, Sequence

from rapidfuzz.distance import Levenshtein

from scoresheet_reader.errors import DataError


def _require_target(target: Sequence):
    if len(target) == 0:
        raise DataError("metric needs a non-empty target sequence")


def correct_positions(pred: Sequence, target: Sequence) -> int:
    return sum(1 for p, t in zip(pred, target) if p == t)


def position_accuracy(pred: Sequence, target: Sequence) -> float:
    """Fraction of target positions matched; a short prediction loses its missing positions."""
    _require_target(target)
    return correct_positions(pred, target) / len(target)


def edit_distance(pred_tokens: Sequence[str], target_tokens: Sequence[str]) -> int:
    return Levenshtein.distance(" ".join(pred_tokens), " ".join(target_tokens))


def cer(pred_tokens: Sequence[str], target_tokens: Sequence[str]) -> float:
    _require_target(target_tokens)
    return edit_distance(pred_tokens, target_tokens) / len(" ".join(target_tokens))


@dataclass
class MetricsReport:
    position_accuracy: float
    first_position_accuracy: float
    exact_match_rate: float
    cer: float
    sample_count: int

    def to_dict(self) -> Dict[str, float]:
        return asdict(self)


def compute_metrics(predictions: Sequence[Sequence[str]], targets: Sequence[Sequence[str]]) -> MetricsReport:
    """Aggregate metrics over aligned lists of predicted and target token sequences.

    CER is pooled the same way as accuracy: total edits over total target characters.
    """
    if len(predictions) != len(targets):
        raise DataError(f"{len(predictions)} predictions for {len(targets)} targets")
    if not targets:
        raise DataError("cannot compute metrics over an empty sample set")
    correct = positions = first = exact = edits = chars = 0
    for pred, target in zip(predictions, targets):
        _require_target(target)
        correct += correct_positions(pred, target)
        positions += len(target)
        first += int(len(pred) > 0 and pred[0] == target[0])
        exact += int(list(pred) == list(target))
        edits += edit_distance(pred, target)
        chars += len(" ".join(target))
    n = len(targets)
    return MetricsReport(correct / positions, first / n, exact / n, edits / chars, n)


__all__ = ["MetricsReport", "cer", "compute_metrics", "correct_positions", "edit_distance", "position_accuracy"]
