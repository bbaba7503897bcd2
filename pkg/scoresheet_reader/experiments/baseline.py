"""
Predictability-only baseline.

A decoder GRU trained on the target code sequences alone. It has no image
input, no encoder and no attention, so whatever it reaches is the accuracy a
reader gets from the sequence statistics without looking at the sheet.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from scoresheet_reader.autodiff import ops
from scoresheet_reader.autodiff.tensor import Parameter, Tensor
from scoresheet_reader.config.presets import dataclass_from_dict
from scoresheet_reader.core.vocabulary import END_CODE, NUM_SPECIALS, START_CODE, Vocabulary
from scoresheet_reader.errors import ConfigError
from scoresheet_reader.model.batch import Batch, pad_targets
from scoresheet_reader.model.config import DTYPES
from scoresheet_reader.model.layers import Embedding, GRUCell, Linear, Module
from scoresheet_reader.synth.dataset import DatasetSpec, sample_codes
from scoresheet_reader.training.trainer import TrainConfig, evaluate_loss, fit, free_running_scores
from scoresheet_reader.utils import Logger


@dataclass
class BaselineConfig:
    vocab_size: int
    embed_dim: int = 32
    hidden_dim: int = 64
    max_decode_len: int = 17
    dropout_rate: float = 0.0
    dtype: str = "float32"
    init_seed: int = 0

    @property
    def numpy_dtype(self):
        return DTYPES[self.dtype]


@dataclass
class DecodedSequences:
    logits: Tensor
    predictions: List[List[int]]


class DecoderOnlyModel(Module):
    """Embedding -> GRU -> vocabulary projection, started from a learned state."""

    def __init__(self, config: BaselineConfig):
        super().__init__("baseline")
        self.config = config
        rng = np.random.default_rng(config.init_seed)
        dtype = config.numpy_dtype
        self.h0 = self.param("h0", np.zeros((1, config.hidden_dim), dtype=dtype))
        self.embedding = self.child(Embedding("embedding", config.vocab_size, config.embed_dim, rng, dtype))
        self.decoder = self.child(GRUCell("decoder", config.embed_dim, config.hidden_dim, rng, dtype))
        self.output = self.child(Linear("output", config.hidden_dim, config.vocab_size, rng, dtype))

    def trainable_parameters(self) -> List[Parameter]:
        return [p for p in self.parameters() if not p.frozen]

    def _run(self, batch_size: int, steps: int, targets: Optional[np.ndarray], train: bool,
             rng: Optional[np.random.Generator]) -> DecodedSequences:
        ones = Tensor(np.ones((batch_size, 1), dtype=self.config.numpy_dtype))
        state = ops.matmul(ones, self.h0)
        prev = np.full(batch_size, START_CODE, dtype=np.int64)
        logits_steps, emitted = [], []
        for t in range(steps):
            state = self.decoder(self.embedding(prev), state)
            logits = self.output(ops.dropout(state, self.config.dropout_rate, train, rng))
            logits_steps.append(logits)
            guess = logits.value.argmax(axis=-1)
            emitted.append(guess)
            prev = targets[:, t] if targets is not None else guess
        predictions = []
        for row in np.stack(emitted, axis=1):
            codes = [int(c) for c in row]
            predictions.append(codes[:codes.index(END_CODE)] if END_CODE in codes else codes)
        return DecodedSequences(ops.stack(logits_steps, axis=1), predictions)

    def collate(self, samples: Sequence) -> Batch:
        """Accepts code sequences or anything with ``.codes``; pixels are never read."""
        sequences = [list(getattr(s, "codes", s)) for s in samples]
        targets, mask = pad_targets(sequences, dtype=self.config.numpy_dtype)
        return Batch(targets, mask)

    def training_logits(self, batch: Batch, teacher_forcing: bool, train: bool = True,
                        rng: Optional[np.random.Generator] = None) -> Tensor:
        targets = batch.targets if teacher_forcing else None
        return self._run(len(batch), batch.steps, targets, train, rng).logits

    def predict(self, batch: Batch, max_len: Optional[int] = None) -> DecodedSequences:
        if max_len is None:
            max_len = self.config.max_decode_len
        if max_len < 1:
            raise ConfigError(f"max_len must be >= 1, got {max_len}")
        return self._run(len(batch), max_len, None, False, None)


@dataclass
class BaselineSpec:
    sizes: List[int] = field(default_factory=lambda: [500, 2000])
    epochs: int = 30
    hidden_dim: int = 64
    embed_dim: int = 32

    def __post_init__(self):
        if not self.sizes or min(self.sizes) < 1:
            raise ConfigError("baseline.sizes needs at least one positive size")
        if self.epochs < 1:
            raise ConfigError("baseline.epochs must be >= 1")

    @staticmethod
    def from_dict(data: Dict[str, Any]) -> "BaselineSpec":
        return dataclass_from_dict(BaselineSpec, data, "baseline")


@dataclass
class BaselineRow:
    size: int
    teacher_forced_accuracy: float
    free_running_accuracy: float
    chance: float
    epochs_run: int

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def recognition_lift(full_accuracy: float, baseline_accuracy: float) -> float:
    """Accuracy the image model gains over reading the sequence statistics alone."""
    return full_accuracy - baseline_accuracy


def train_baseline(train_sequences: Sequence[Sequence[int]], vocab_size: int, spec: BaselineSpec,
                   cfg: TrainConfig, init_seed: int = 0) -> DecoderOnlyModel:
    length = max(len(s) for s in train_sequences)
    model = DecoderOnlyModel(BaselineConfig(vocab_size, spec.embed_dim, spec.hidden_dim, length + 1,
                                            init_seed=init_seed))
    fit(model, list(train_sequences), [], replace(cfg, max_epochs=spec.epochs, stop_on_convergence=False))
    return model


def score_baseline(model: DecoderOnlyModel, test_sequences: Sequence[Sequence[int]],
                   cfg: TrainConfig) -> Dict[str, float]:
    _, tf_acc = evaluate_loss(model, test_sequences, replace(cfg, teacher_forcing=True))
    free_acc, _ = free_running_scores(model, test_sequences, cfg.batch_size)
    return {"teacher_forced_accuracy": tf_acc, "free_running_accuracy": free_acc}


def held_out_sequences(train_spec: DatasetSpec, test_spec: DatasetSpec, vocabulary: Vocabulary,
                       templates: Sequence[Sequence[int]]) -> List[List[int]]:
    """Held-out target sequences drawn from the training source, with the held-out seeds and size."""
    spec = replace(test_spec, source=train_spec.source, num_templates=train_spec.num_templates,
                   mutation_prob=train_spec.mutation_prob)
    return sample_codes(spec, vocabulary, templates)


def run_predictability_baseline(train_spec: DatasetSpec, test_spec: DatasetSpec, vocabulary: Vocabulary,
                                templates: Sequence[Sequence[int]], spec: BaselineSpec, cfg: TrainConfig,
                                init_seed: int = 0) -> List[BaselineRow]:
    """Train the decoder-only model on the same target sequences the image runs see, per training size.

    Sequences come from ``sample_codes``, so for each size they are exactly the
    targets of the paired image dataset; the free-running accuracy on the
    held-out targets is the headline number. Teacher-forced accuracy counts END.
    """
    test_sequences = held_out_sequences(train_spec, test_spec, vocabulary, templates)
    chance = 1.0 / (len(vocabulary) - NUM_SPECIALS)
    rows = []
    for size in spec.sizes:
        train_sequences = sample_codes(replace(train_spec, size=size), vocabulary, templates)
        model = train_baseline(train_sequences, len(vocabulary), spec, cfg, init_seed)
        scores = score_baseline(model, test_sequences, cfg)
        rows.append(BaselineRow(size, scores["teacher_forced_accuracy"], scores["free_running_accuracy"],
                                chance, spec.epochs))
        Logger.info(f"Baseline size {size}: free-running accuracy {scores['free_running_accuracy']:.4f} "
                    f"(chance {chance:.4f})")
    return rows


__all__ = [
    "BaselineConfig",
    "BaselineRow",
    "BaselineSpec",
    "DecoderOnlyModel",
    "held_out_sequences",
    "recognition_lift",
    "run_predictability_baseline",
    "score_baseline",
    "train_baseline",
]
