"""
Mini-batch assembly shared by every trainable model.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from scoresheet_reader.core.vocabulary import END_CODE, PAD_CODE
from scoresheet_reader.errors import DataError


@dataclass
class Batch:
    targets: np.ndarray  # (B, T) codes, END after the last move, PAD after that
    mask: np.ndarray  # (B, T) 1.0 on non-PAD positions
    images: Optional[np.ndarray] = None  # (B, H, W) in [0, 1]

    def __len__(self):
        return self.targets.shape[0]

    @property
    def steps(self) -> int:
        return self.targets.shape[1]

    def move_codes(self):
        """Target moves per sample, without END and PAD."""
        return [[int(c) for c in row[:int(m.sum()) - 1]] for row, m in zip(self.targets, self.mask)]


def pad_targets(sequences: Sequence[Sequence[int]], steps: Optional[int] = None, dtype=np.float32):
    """Append END to every sequence and right-pad with PAD to a common length."""
    if not sequences:
        raise DataError("cannot build a batch from zero samples")
    longest = max(len(s) for s in sequences) + 1
    steps = steps or longest
    if steps < longest:
        raise DataError(f"sequence of {longest - 1} moves does not fit {steps} decode steps")
    targets = np.full((len(sequences), steps), PAD_CODE, dtype=np.int64)
    mask = np.zeros((len(sequences), steps), dtype=dtype)
    for i, seq in enumerate(sequences):
        targets[i, :len(seq)] = seq
        targets[i, len(seq)] = END_CODE
        mask[i, :len(seq) + 1] = 1
    return targets, mask


__all__ = ["Batch", "pad_targets"]
