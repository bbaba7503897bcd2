"""
Image-to-sequence scoresheet reader.

Convolutional features are flattened row-major into a sequence, run through a
GRU encoder, and read by a GRU decoder that attends over the encoder outputs
at every step.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from scoresheet_reader.autodiff import ops
from scoresheet_reader.autodiff.tensor import Parameter, Tensor
from scoresheet_reader.core.vocabulary import END_CODE, START_CODE
from scoresheet_reader.errors import ConfigError, ShapeError
from scoresheet_reader.model.batch import Batch, pad_targets
from scoresheet_reader.model.config import GridGeometry, ModelConfig
from scoresheet_reader.model.layers import AdditiveAttention, ConvBackbone, Embedding, GRUCell, Linear, Module


@dataclass
class FeatureGrid:
    values: Tensor  # (B, L, C), row-major over the (rows, cols) grid
    geometry: GridGeometry

    @property
    def length(self) -> int:
        return self.values.shape[1]


@dataclass
class AttentionRecord:
    weights: np.ndarray  # (B, T, L)
    geometry: GridGeometry

    @property
    def steps(self) -> int:
        return self.weights.shape[1]

    def sample(self, index: int) -> np.ndarray:
        return self.weights[index]


@dataclass
class DecodeResult:
    logits: Tensor  # (B, T, V)
    attention: AttentionRecord
    predictions: List[List[int]]  # argmax codes, cut before the first END


class ScoresheetModel(Module):
    def __init__(self, config: ModelConfig):
        super().__init__("model")
        self.config = config
        rng = np.random.default_rng(config.init_seed)
        dtype = config.numpy_dtype
        hidden, enc_dim = config.hidden_dim, config.encoder_dim

        self.backbone = self.child(ConvBackbone(config.backbone_channels, rng, dtype=dtype))
        channels = self.backbone.out_channels
        self.encoder = self.child(GRUCell("encoder", channels, hidden, rng, dtype))
        self.encoder_reverse = (self.child(GRUCell("encoder_reverse", channels, hidden, rng, dtype))
                                if config.bidirectional else None)
        self.init_state = self.child(Linear("decoder_init", enc_dim, hidden, rng, dtype))
        self.attention = self.child(AdditiveAttention("attention", hidden, enc_dim, config.attention_dim, rng, dtype))
        self.embedding = self.child(Embedding("embedding", config.vocab_size, config.embed_dim, rng, dtype))
        self.decoder = self.child(GRUCell("decoder", config.embed_dim + enc_dim, hidden, rng, dtype))
        self.output = self.child(Linear("output", hidden, config.vocab_size, rng, dtype))
        self.backbone.set_frozen(config.freeze_backbone)

    def trainable_parameters(self) -> List[Parameter]:
        return [p for p in self.parameters() if not p.frozen]

    # ------------------------------------------------------------------
    # Network pieces
    # ------------------------------------------------------------------

    def extract_features(self, images) -> FeatureGrid:
        images = np.asarray(images, dtype=self.config.numpy_dtype)
        if images.ndim == 2:
            images = images[None]
        width, height = self.config.image_size
        if images.ndim != 3 or images.shape[1:] != (height, width):
            raise ShapeError("extract_features", images.shape, (height, width), detail="expected (B, H, W) images")
        fmap = self.backbone(Tensor(images[:, None]))
        batch, channels, rows, cols = fmap.shape
        values = ops.reshape(ops.transpose(fmap, (0, 2, 3, 1)), (batch, rows * cols, channels))
        return FeatureGrid(values, self.config.grid)

    def encode(self, features: Tensor, initial_state: Optional[Tensor] = None, train: bool = False,
               rng: Optional[np.random.Generator] = None) -> Tuple[Tensor, Tensor]:
        """GRU over the flattened grid; returns (outputs (B, L, D), final state (B, D))."""
        batch, length = features.shape[0], features.shape[1]
        if length < 1:
            raise ShapeError("encode", features.shape, detail="empty feature sequence")
        h0 = initial_state if initial_state is not None else Tensor(
            np.zeros((batch, self.config.hidden_dim), dtype=features.dtype))
        outputs, final = self.encoder.run(features, h0)
        if self.encoder_reverse is not None:
            reverse, reverse_final = self.encoder_reverse.run(features, h0, reverse=True)
            outputs = [ops.concat([f, b], axis=-1) for f, b in zip(outputs, reverse)]
            final = ops.concat([final, reverse_final], axis=-1)
        memory = ops.stack(outputs, axis=1)
        return ops.dropout(memory, self.config.dropout_rate, train, rng), final

    def initial_decoder_state(self, final: Tensor) -> Tensor:
        return self.init_state(final)

    def attend(self, query: Tensor, memory: Tensor, keys: Optional[Tensor] = None) -> Tuple[Tensor, Tensor]:
        return self.attention(query, memory, keys)

    def decode_step(self, prev_codes, state: Tensor, memory: Tensor, keys: Optional[Tensor] = None,
                    train: bool = False, rng: Optional[np.random.Generator] = None) -> Tuple[Tensor, Tensor, Tensor]:
        """One decoder step: returns (logits (B, V), new state (B, H), alpha (B, L))."""
        codes = np.atleast_1d(np.asarray(prev_codes, dtype=np.int64))
        context, alpha = self.attend(state, memory, keys)
        x = ops.concat([self.embedding(codes), context], axis=-1)
        new_state = self.decoder(x, state)
        logits = self.output(ops.dropout(new_state, self.config.dropout_rate, train, rng))
        return logits, new_state, alpha

    # ------------------------------------------------------------------
    # Full passes
    # ------------------------------------------------------------------

    def _decode(self, images, steps: int, targets: Optional[np.ndarray], train: bool,
                rng: Optional[np.random.Generator], stop_at_end: bool) -> DecodeResult:
        grid = self.extract_features(images)
        memory, final = self.encode(grid.values, train=train, rng=rng)
        keys = self.attention.precompute_keys(memory)
        state = self.initial_decoder_state(final)
        batch = memory.shape[0]

        prev = np.full(batch, START_CODE, dtype=np.int64)
        finished = np.zeros(batch, dtype=bool)
        logits_steps, alphas, emitted = [], [], []
        for t in range(steps):
            logits, state, alpha = self.decode_step(prev, state, memory, keys, train, rng)
            logits_steps.append(logits)
            alphas.append(alpha.value)
            guess = logits.value.argmax(axis=-1)
            emitted.append(guess)
            prev = targets[:, t] if targets is not None else guess
            finished |= guess == END_CODE
            if stop_at_end and finished.all():
                break

        predictions = []
        for row in np.stack(emitted, axis=1):
            codes = [int(c) for c in row]
            predictions.append(codes[:codes.index(END_CODE)] if END_CODE in codes else codes)
        record = AttentionRecord(np.stack(alphas, axis=1), grid.geometry)
        return DecodeResult(ops.stack(logits_steps, axis=1), record, predictions)

    def forward_teacher_forced(self, images, targets, train: bool = False,
                               rng: Optional[np.random.Generator] = None) -> Tuple[Tensor, AttentionRecord]:
        """Logits (B, T, V) when step t is fed target[t-1] (START at t = 0)."""
        targets = np.asarray(targets, dtype=np.int64)
        if targets.ndim == 1:
            targets = targets[None]
        if targets.shape[1] > self.config.max_decode_len:
            raise ShapeError("forward_teacher_forced", targets.shape,
                             detail=f"max_decode_len is {self.config.max_decode_len}")
        result = self._decode(images, targets.shape[1], targets, train, rng, stop_at_end=False)
        return result.logits, result.attention

    def forward_free_running(self, images, max_len: Optional[int] = None, train: bool = False,
                             rng: Optional[np.random.Generator] = None, run_all_steps: bool = False) -> DecodeResult:
        """Greedy decoding fed with its own argmax; stops once every sample emitted END."""
        if max_len is None:
            max_len = self.config.max_decode_len
        if max_len < 1:
            raise ConfigError(f"max_len must be >= 1, got {max_len}")
        return self._decode(images, max_len, None, train, rng, stop_at_end=not run_all_steps)

    # ------------------------------------------------------------------
    # Training interface
    # ------------------------------------------------------------------

    def collate(self, samples: Sequence) -> Batch:
        """Batch of ``SampleManifest``s: stacked pixels plus padded targets."""
        images = np.stack([s.load_pixels() for s in samples]).astype(self.config.numpy_dtype, copy=False)
        targets, mask = pad_targets([s.codes for s in samples], dtype=self.config.numpy_dtype)
        return Batch(targets, mask, images)

    def training_logits(self, batch: Batch, teacher_forcing: bool, train: bool = True,
                        rng: Optional[np.random.Generator] = None) -> Tensor:
        if teacher_forcing:
            return self.forward_teacher_forced(batch.images, batch.targets, train, rng)[0]
        return self.forward_free_running(batch.images, batch.steps, train, rng, run_all_steps=True).logits

    def predict(self, batch: Batch, max_len: Optional[int] = None) -> DecodeResult:
        return self.forward_free_running(batch.images, max_len)


__all__ = ["AttentionRecord", "DecodeResult", "FeatureGrid", "ScoresheetModel"]
