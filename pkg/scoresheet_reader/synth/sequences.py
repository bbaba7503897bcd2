"""
Target sequence sources.

Template sources copy a seeded-chosen base sequence (a shared opening) and
mutate positions independently; uniform sources draw every move i.i.d. and so
carry no predictability at all.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Sequence, Tuple

import numpy as np

from scoresheet_reader.core.vocabulary import NUM_SPECIALS
from scoresheet_reader.errors import ConfigError

TEMPLATE = "template"
UNIFORM = "uniform"


@dataclass(frozen=True)
class SequenceSource:
    kind: str
    vocab_size: int
    templates: Tuple[Tuple[int, ...], ...] = field(default_factory=tuple)
    mutation_prob: float = 0.0

    def __post_init__(self):
        if self.kind not in (TEMPLATE, UNIFORM):
            raise ConfigError(f"unknown sequence source kind {self.kind!r}")
        if not 0.0 <= self.mutation_prob <= 1.0:
            raise ConfigError(f"mutation_prob must lie in [0, 1], got {self.mutation_prob}")
        if self.vocab_size <= NUM_SPECIALS:
            raise ConfigError("vocabulary has no move codes")
        if self.kind == TEMPLATE and not self.templates:
            raise ConfigError("template source needs at least one template")

    @staticmethod
    def from_templates(templates: Sequence[Sequence[int]], vocab_size: int,
                       mutation_prob: float) -> "SequenceSource":
        return SequenceSource(TEMPLATE, vocab_size, tuple(tuple(int(c) for c in t) for t in templates),
                              mutation_prob)

    @staticmethod
    def uniform(vocab_size: int) -> "SequenceSource":
        return SequenceSource(UNIFORM, vocab_size)

    @property
    def num_moves(self) -> int:
        return self.vocab_size - NUM_SPECIALS


def sample_with_origin(src: SequenceSource, length: int, seed: int) -> Tuple[List[int], str]:
    """Draw a sequence and name where it came from (``template-<k>`` or ``random``)."""
    rng = np.random.default_rng(seed)
    if src.kind == UNIFORM:
        codes = rng.integers(NUM_SPECIALS, src.vocab_size, size=length)
        return [int(c) for c in codes], "random"

    index = int(rng.integers(len(src.templates)))
    template = src.templates[index]
    if length > len(template):
        raise ConfigError(f"template {index} has {len(template)} moves, {length} requested")
    codes = np.asarray(template[:length], dtype=np.int64)
    mutate = rng.random(length) < src.mutation_prob
    replacement = rng.integers(NUM_SPECIALS, src.vocab_size, size=length)
    codes = np.where(mutate, replacement, codes)
    return [int(c) for c in codes], f"template-{index}"


def sample_sequence(src: SequenceSource, length: int, seed: int) -> List[int]:
    return sample_with_origin(src, length, seed)[0]


__all__ = ["SequenceSource", "sample_sequence", "sample_with_origin", "TEMPLATE", "UNIFORM"]
