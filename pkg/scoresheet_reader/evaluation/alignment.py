"""
Attention alignment diagnostics.

A decode step "hits" when the pixel center of its most attended grid cell lies
inside the ground-truth ink box of that move, grown by a tolerance.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Dict, List, Sequence

import numpy as np

from scoresheet_reader.errors import DataError
from scoresheet_reader.model.config import GridGeometry


def attention_entropy(alpha: np.ndarray) -> np.ndarray:
    """-sum(alpha * ln alpha) over the last axis, with 0 ln 0 = 0."""
    alpha = np.asarray(alpha, dtype=np.float64)
    safe = np.where(alpha > 0, alpha, 1.0)
    return -(alpha * np.log(safe)).sum(axis=-1)


def _inside(point, box, tolerance: float) -> bool:
    x, y = point
    bx, by, bw, bh = box
    return bx - tolerance <= x < bx + bw + tolerance and by - tolerance <= y < by + bh + tolerance


@dataclass
class StepAlignment:
    step: int
    cell: int
    center: tuple
    hit: bool
    entropy: float


@dataclass
class AlignmentReport:
    hit_rate: float
    mean_entropy: float
    steps: List[StepAlignment] = field(default_factory=list)

    @property
    def hits(self) -> int:
        return sum(s.hit for s in self.steps)

    def to_dict(self, with_steps: bool = False) -> Dict[str, object]:
        data = {"hit_rate": self.hit_rate, "mean_entropy": self.mean_entropy, "steps_compared": len(self.steps)}
        if with_steps:
            data["steps"] = [asdict(s) for s in self.steps]
        return data


def alignment_hit_rate(weights: np.ndarray, bboxes: Sequence[Sequence[float]], geometry: GridGeometry,
                       tolerance: float = 0.0) -> AlignmentReport:
    """Compare the first ``len(bboxes)`` steps of one sample's (T, L) attention weights with the ink boxes."""
    weights = np.asarray(weights)
    if weights.ndim != 2 or weights.shape[1] != geometry.size:
        raise DataError(f"attention of shape {weights.shape} does not match a {geometry.rows}x{geometry.cols} grid")
    if weights.shape[0] < len(bboxes):
        raise DataError(f"{len(bboxes)} boxes but only {weights.shape[0]} decode steps recorded")
    if not bboxes:
        raise DataError("alignment needs at least one box")
    steps = []
    for t, box in enumerate(bboxes):
        cell = int(weights[t].argmax())
        center = geometry.pixel_center(cell)
        steps.append(StepAlignment(t, cell, center, _inside(center, box, tolerance),
                                   float(attention_entropy(weights[t]))))
    return AlignmentReport(sum(s.hit for s in steps) / len(steps),
                           float(np.mean([s.entropy for s in steps])), steps)


def combine_reports(reports: Sequence[AlignmentReport]) -> AlignmentReport:
    """Pool per-sample reports, weighting by steps compared."""
    steps = [s for r in reports for s in r.steps]
    if not steps:
        raise DataError("no alignment steps to combine")
    return AlignmentReport(sum(s.hit for s in steps) / len(steps), float(np.mean([s.entropy for s in steps])), steps)


def chance_hit_rate(bboxes: Sequence[Sequence[float]], geometry: GridGeometry, tolerance: float = 0.0) -> float:
    """Expected hit rate of an argmax drawn uniformly over the grid cells.

    This is the grid-sampled version of (box area / image area): the share of
    cell centers that fall inside each grown box, averaged over boxes.
    """
    if not bboxes:
        raise DataError("chance rate needs at least one box")
    centers = geometry.centers()
    shares = []
    for box in bboxes:
        inside = [_inside(c, box, tolerance) for c in centers]
        shares.append(sum(inside) / len(centers))
    return float(np.mean(shares))


__all__ = ["AlignmentReport", "StepAlignment", "alignment_hit_rate", "attention_entropy", "chance_hit_rate",
           "combine_reports"]
