"""
Finite-difference checks of the composed network graphs.

Together with the primitive cases this is the full self-check behind the
``gradcheck`` command.
"""

from __future__ import annotations

from typing import Dict, List

import numpy as np

from scoresheet_reader.autodiff import ops
from scoresheet_reader.autodiff.gradcheck import GradCheckResult, primitive_cases, projected, run_cases
from scoresheet_reader.autodiff.tensor import Tensor
from scoresheet_reader.model.config import ModelConfig
from scoresheet_reader.model.layers import GRUCell
from scoresheet_reader.model.network import ScoresheetModel


def tiny_config(**overrides) -> ModelConfig:
    """One conv block over an 8x6 image: a 2x3 grid (L = 6), vocab 5, three decode steps."""
    params = dict(image_size=(8, 6), vocab_size=5, backbone_channels=[2], hidden_dim=4, attention_dim=3,
                  embed_dim=2, max_decode_len=3, dropout_rate=0.0, dtype="float64", init_seed=3)
    params.update(overrides)
    return ModelConfig(**params)


def composed_cases(seed: int = 0) -> Dict[str, tuple]:
    rng = np.random.default_rng(seed + 100)
    cases = {}

    cell = GRUCell("cell", 3, 4, rng, dtype=np.float64)
    x, h = Tensor(rng.normal(size=(2, 3))), Tensor(rng.normal(size=(2, 4)))
    w = rng.normal(size=(2, 4))
    cases["gru_step"] = (lambda: projected(cell(x, h), w), [x, h] + cell.parameters())

    model = ScoresheetModel(tiny_config())
    features = Tensor(rng.normal(size=(2, 6, 2)))
    w_enc = rng.normal(size=(2, 6, 4))
    cases["encoder"] = (lambda: projected(model.encode(features)[0], w_enc),
                        [features] + model.encoder.parameters())

    bi_model = ScoresheetModel(tiny_config(bidirectional=True))
    w_bi = rng.normal(size=(2, 8))
    cases["bidirectional_encoder_final"] = (lambda: projected(bi_model.encode(features)[1], w_bi),
                                            [features] + bi_model.encoder_reverse.parameters())

    query, memory = Tensor(rng.normal(size=(2, 4))), Tensor(rng.normal(size=(2, 6, 4)))
    w_ctx, w_alpha = rng.normal(size=(2, 4)), rng.normal(size=(2, 6))

    def attention_loss():
        context, alpha = model.attend(query, memory)
        return ops.add(projected(context, w_ctx), projected(alpha, w_alpha))

    cases["attention"] = (attention_loss, [query, memory] + model.attention.parameters())

    state = Tensor(rng.normal(size=(2, 4)))
    prev = np.array([2, 4])
    w_logits = rng.normal(size=(2, 5))
    cases["decode_step"] = (lambda: projected(model.decode_step(prev, state, memory)[0], w_logits),
                            [state, memory] + model.embedding.parameters() + model.decoder.parameters()
                            + model.output.parameters())

    images = rng.uniform(0, 1, size=(2, 6, 8))
    targets = np.array([[4, 3, 1], [2, 1, 2]])
    mask = np.array([[1, 1, 1], [1, 1, 0]], dtype=np.float64)

    def teacher_forced_loss():
        logits, _ = model.forward_teacher_forced(images, targets)
        return ops.masked_cross_entropy_with_logits(logits, targets, mask)

    cases["teacher_forced_loss"] = (teacher_forced_loss, model.parameters())
    return cases


def run_gradcheck_suite(seed: int = 0, points: int = 10) -> List[GradCheckResult]:
    cases = primitive_cases(seed)
    cases.update(composed_cases(seed))
    return run_cases(cases, points=points, seed=seed)


__all__ = ["composed_cases", "run_gradcheck_suite", "tiny_config"]
