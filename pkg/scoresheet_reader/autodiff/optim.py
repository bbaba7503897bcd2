"""
Adam, gradient clipping and weight initialization.
"""

from __future__ import annotations

from typing import Sequence, Tuple

import numpy as np

from scoresheet_reader.autodiff.tensor import Parameter
from scoresheet_reader.errors import OptimizerError


def adam_step(params: Sequence[Parameter], lr: float, beta1: float = 0.9, beta2: float = 0.999,
              eps: float = 1e-7, t: int = 1):
    """One bias-corrected Adam update. Moments change in place; grads are left untouched."""
    if t < 1:
        raise OptimizerError(f"Adam step counter must be >= 1 (bias correction undefined at t={t})")
    bc1 = 1.0 - beta1 ** t
    bc2 = 1.0 - beta2 ** t
    for p in params:
        if p.frozen:
            continue
        g = p.grad
        p.adam_m *= beta1
        p.adam_m += (1.0 - beta1) * g
        p.adam_v *= beta2
        p.adam_v += (1.0 - beta2) * (g * g)
        update = lr * (p.adam_m / bc1) / (np.sqrt(p.adam_v / bc2) + eps)
        p.value -= update.astype(p.value.dtype, copy=False)


class Adam:
    """Keeps the step counter so Adam state survives across ``fit`` calls."""

    def __init__(self, lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-7):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0

    def step(self, params: Sequence[Parameter]):
        self.t += 1
        adam_step(params, self.lr, self.beta1, self.beta2, self.eps, self.t)


def global_grad_norm(params: Sequence[Parameter]) -> float:
    return float(np.sqrt(sum(float(np.sum(np.square(p.grad, dtype=np.float64))) for p in params)))


def clip_grad_norm(params: Sequence[Parameter], max_norm: float) -> float:
    """Scale all gradients so their joint L2 norm is at most *max_norm*; returns the norm before clipping."""
    norm = global_grad_norm(params)
    if max_norm > 0 and norm > max_norm:
        scale = max_norm / (norm + 1e-12)
        for p in params:
            p.grad *= scale
    return norm


def glorot_uniform(rng: np.random.Generator, shape: Tuple[int, ...], fan_in: int, fan_out: int,
                   dtype=np.float32) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape).astype(dtype)


__all__ = ["Adam", "adam_step", "clip_grad_norm", "global_grad_norm", "glorot_uniform"]
