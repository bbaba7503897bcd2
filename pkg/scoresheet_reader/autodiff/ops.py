"""
Primitive differentiable operations.

Each op computes its forward value with numpy, checks its inputs for
non-finite values and, when a tape is active and some input needs a gradient,
records a closure returning the gradient for each input.
"""

from __future__ import annotations

from typing import Optional, Sequence, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from scoresheet_reader.autodiff.tensor import Tensor, active_tape, as_tensor
from scoresheet_reader.errors import CodeRangeError, ConfigError, DataError, NumericError, ShapeError


def _check_finite(op: str, *arrays: np.ndarray):
    for a in arrays:
        if not np.isfinite(a).all():
            raise NumericError(f"{op}: non-finite input")


def _result(value: np.ndarray, inputs: Sequence[Tensor], backward_fn) -> Tensor:
    tape = active_tape()
    track = tape is not None and any(t.requires_grad for t in inputs)
    out = Tensor(value, requires_grad=track)
    if track:
        tape.record(out, inputs, backward_fn)
    return out


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _broadcast_shape(op: str, a: Tensor, b: Tensor) -> Tuple[int, ...]:
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(op, a.shape, b.shape) from None


# ---------------------------------------------------------------------------
# Elementwise arithmetic
# ---------------------------------------------------------------------------

def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape("add", a, b)
    _check_finite("add", a.value, b.value)
    return _result(a.value + b.value, (a, b),
                   lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)))


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape("sub", a, b)
    _check_finite("sub", a.value, b.value)
    return _result(a.value - b.value, (a, b),
                   lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)))


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape("mul", a, b)
    _check_finite("mul", a.value, b.value)
    return _result(a.value * b.value, (a, b),
                   lambda g: (_unbroadcast(g * b.value, a.shape), _unbroadcast(g * a.value, b.shape)))


def sum_all(x: Tensor) -> Tensor:
    x = as_tensor(x)
    _check_finite("sum", x.value)
    return _result(np.asarray(x.value.sum(), dtype=x.dtype), (x,),
                   lambda g: (np.broadcast_to(g, x.shape).copy(),))


# ---------------------------------------------------------------------------
# Shape manipulation
# ---------------------------------------------------------------------------

def reshape(x: Tensor, shape: Sequence[int]) -> Tensor:
    x = as_tensor(x)
    try:
        value = x.value.reshape(shape)
    except ValueError:
        raise ShapeError("reshape", x.shape, tuple(shape)) from None
    return _result(value, (x,), lambda g: (g.reshape(x.shape),))


def transpose(x: Tensor, axes: Sequence[int]) -> Tensor:
    x = as_tensor(x)
    axes = tuple(axes)
    inverse = tuple(np.argsort(axes))
    return _result(np.ascontiguousarray(x.value.transpose(axes)), (x,),
                   lambda g: (g.transpose(inverse),))


def index(x: Tensor, key) -> Tensor:
    """Basic (slice/integer) indexing."""
    x = as_tensor(x)

    def backward(g):
        full = np.zeros_like(x.value)
        full[key] = g
        return (full,)

    return _result(np.ascontiguousarray(x.value[key]), (x,), backward)


def concat(tensors: Sequence[Tensor], axis: int = -1) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    try:
        value = np.concatenate([t.value for t in tensors], axis=axis)
    except ValueError:
        raise ShapeError("concat", *(t.shape for t in tensors)) from None
    bounds = np.cumsum([t.shape[axis] for t in tensors])[:-1]
    return _result(value, tensors, lambda g: tuple(np.split(g, bounds, axis=axis)))


def stack(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    try:
        value = np.stack([t.value for t in tensors], axis=axis)
    except ValueError:
        raise ShapeError("stack", *(t.shape for t in tensors)) from None
    count = len(tensors)
    return _result(value, tensors,
                   lambda g: tuple(np.squeeze(part, axis=axis) for part in np.split(g, count, axis=axis)))


# ---------------------------------------------------------------------------
# Linear algebra
# ---------------------------------------------------------------------------

def matmul(a, b) -> Tensor:
    """``a @ b`` for 2-D operands, a batch of matrices times a matrix, or matching batches."""
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2] or (b.ndim > 2 and a.shape[:-2] != b.shape[:-2]):
        raise ShapeError("matmul", a.shape, b.shape)
    _check_finite("matmul", a.value, b.value)

    def backward(g):
        grad_a = np.matmul(g, np.swapaxes(b.value, -1, -2))
        if b.ndim == 2:
            grad_b = a.value.reshape(-1, a.shape[-1]).T @ g.reshape(-1, g.shape[-1])
        else:
            grad_b = np.matmul(np.swapaxes(a.value, -1, -2), g)
        return grad_a, grad_b

    return _result(np.matmul(a.value, b.value), (a, b), backward)


def affine(x, weight, bias) -> Tensor:
    """``x @ W + b`` over the last axis of *x*."""
    x, weight, bias = as_tensor(x), as_tensor(weight), as_tensor(bias)
    if weight.ndim != 2 or x.shape[-1] != weight.shape[0] or bias.shape != (weight.shape[1],):
        raise ShapeError("affine", x.shape, weight.shape, bias.shape)
    _check_finite("affine", x.value, weight.value, bias.value)

    def backward(g):
        flat_g = g.reshape(-1, g.shape[-1])
        grad_w = x.value.reshape(-1, x.shape[-1]).T @ flat_g
        return g @ weight.value.T, grad_w, flat_g.sum(axis=0)

    return _result(x.value @ weight.value + bias.value, (x, weight, bias), backward)


# ---------------------------------------------------------------------------
# Convolution and pooling (NCHW)
# ---------------------------------------------------------------------------

def conv2d(x, weight, bias, stride: int = 1) -> Tensor:
    """Valid-padding 2-D cross-correlation. x: (N, C, H, W), weight: (F, C, kh, kw)."""
    x, weight, bias = as_tensor(x), as_tensor(weight), as_tensor(bias)
    if x.ndim != 4 or weight.ndim != 4 or x.shape[1] != weight.shape[1] or bias.shape != (weight.shape[0],):
        raise ShapeError("conv2d", x.shape, weight.shape, bias.shape)
    n, c, h, w = x.shape
    f, _, kh, kw = weight.shape
    if h < kh or w < kw:
        raise ShapeError("conv2d", x.shape, weight.shape, detail="input smaller than kernel")
    _check_finite("conv2d", x.value, weight.value, bias.value)

    windows = sliding_window_view(x.value, (kh, kw), axis=(2, 3))[:, :, ::stride, ::stride]
    out_h, out_w = windows.shape[2], windows.shape[3]
    out = np.tensordot(windows, weight.value, axes=([1, 4, 5], [1, 2, 3]))  # (N, Ho, Wo, F)
    out = out.transpose(0, 3, 1, 2) + bias.value[None, :, None, None]

    def backward(g):
        grad_w = np.tensordot(g, windows, axes=([0, 2, 3], [0, 2, 3]))  # (F, C, kh, kw)
        grad_b = g.sum(axis=(0, 2, 3))
        grad_x = np.zeros_like(x.value)
        for i in range(kh):
            for j in range(kw):
                contrib = np.tensordot(g, weight.value[:, :, i, j], axes=([1], [0]))  # (N, Ho, Wo, C)
                grad_x[:, :, i:i + stride * out_h:stride, j:j + stride * out_w:stride] += contrib.transpose(0, 3, 1, 2)
        return grad_x, grad_w, grad_b

    return _result(np.ascontiguousarray(out), (x, weight, bias), backward)


def maxpool2d(x, size: int = 2) -> Tensor:
    """Non-overlapping max pooling; trailing rows/columns that do not fill a window are dropped."""
    x = as_tensor(x)
    if x.ndim != 4 or x.shape[2] < size or x.shape[3] < size:
        raise ShapeError("maxpool2d", x.shape, detail=f"window {size}")
    _check_finite("maxpool2d", x.value)
    n, c, h, w = x.shape
    out_h, out_w = h // size, w // size
    blocks = (x.value[:, :, :out_h * size, :out_w * size]
              .reshape(n, c, out_h, size, out_w, size)
              .transpose(0, 1, 2, 4, 3, 5)
              .reshape(n, c, out_h, out_w, size * size))
    winner = blocks.argmax(axis=-1)
    out = np.take_along_axis(blocks, winner[..., None], axis=-1)[..., 0]

    def backward(g):
        scattered = np.zeros_like(blocks)
        np.put_along_axis(scattered, winner[..., None], g[..., None], axis=-1)
        scattered = (scattered.reshape(n, c, out_h, out_w, size, size)
                     .transpose(0, 1, 2, 4, 3, 5)
                     .reshape(n, c, out_h * size, out_w * size))
        grad_x = np.zeros_like(x.value)
        grad_x[:, :, :out_h * size, :out_w * size] = scattered
        return (grad_x,)

    return _result(out, (x,), backward)


# ---------------------------------------------------------------------------
# Nonlinearities
# ---------------------------------------------------------------------------

def relu(x) -> Tensor:
    x = as_tensor(x)
    _check_finite("relu", x.value)
    positive = x.value > 0
    return _result(np.where(positive, x.value, 0).astype(x.dtype), (x,), lambda g: (g * positive,))


def tanh(x) -> Tensor:
    x = as_tensor(x)
    _check_finite("tanh", x.value)
    y = np.tanh(x.value)
    return _result(y, (x,), lambda g: (g * (1 - y * y),))


def sigmoid(x) -> Tensor:
    x = as_tensor(x)
    _check_finite("sigmoid", x.value)
    e = np.exp(-np.abs(x.value))
    y = np.where(x.value >= 0, 1 / (1 + e), e / (1 + e)).astype(x.dtype)
    return _result(y, (x,), lambda g: (g * y * (1 - y),))


def softmax(x) -> Tensor:
    """Softmax over the last axis."""
    x = as_tensor(x)
    _check_finite("softmax", x.value)
    shifted = np.exp(x.value - x.value.max(axis=-1, keepdims=True))
    y = shifted / shifted.sum(axis=-1, keepdims=True)
    return _result(y, (x,), lambda g: (y * (g - (g * y).sum(axis=-1, keepdims=True)),))


# ---------------------------------------------------------------------------
# Embedding, dropout, loss
# ---------------------------------------------------------------------------

def embedding_gather(table, codes) -> Tensor:
    """Rows of *table* (V, E) selected by integer *codes* of any shape."""
    table = as_tensor(table)
    codes = np.asarray(codes, dtype=np.int64)
    if table.ndim != 2:
        raise ShapeError("embedding_gather", table.shape, codes.shape)
    if codes.size and (codes.min() < 0 or codes.max() >= table.shape[0]):
        raise CodeRangeError(f"code out of range [0, {table.shape[0]}): {codes.min()}..{codes.max()}")
    _check_finite("embedding_gather", table.value)

    def backward(g):
        grad = np.zeros_like(table.value)
        np.add.at(grad, codes.reshape(-1), g.reshape(-1, table.shape[1]))
        return (grad,)

    return _result(table.value[codes], (table,), backward)


def dropout(x, rate: float, train: bool, rng: Optional[np.random.Generator] = None) -> Tensor:
    """Inverted dropout: survivors scaled by 1/(1-rate) in training, identity otherwise."""
    if not 0.0 <= rate < 1.0:
        raise ConfigError(f"dropout rate must lie in [0, 1), got {rate}")
    x = as_tensor(x)
    if not train or rate == 0.0:
        return x
    if rng is None:
        raise ConfigError("training-mode dropout needs a random generator")
    mask = ((rng.random(x.shape) >= rate) / (1.0 - rate)).astype(x.dtype)
    return _result(x.value * mask, (x,), lambda g: (g * mask,))


def masked_cross_entropy_with_logits(logits, targets, mask) -> Tensor:
    """Mean negative log-likelihood over the positions where *mask* is nonzero.

    logits: (..., V); targets and mask: (...). Masked positions contribute
    neither loss nor gradient, and their logits and targets are never read.
    """
    logits = as_tensor(logits)
    targets = np.asarray(targets, dtype=np.int64)
    mask = np.asarray(mask, dtype=logits.dtype)
    if logits.shape[:-1] != targets.shape or targets.shape != mask.shape:
        raise ShapeError("masked_cross_entropy_with_logits", logits.shape, targets.shape, mask.shape)
    keep = mask > 0
    live = targets[keep]
    if live.size and (live.min() < 0 or live.max() >= logits.shape[-1]):
        raise CodeRangeError(f"target code out of range [0, {logits.shape[-1]})")
    _check_finite("masked_cross_entropy_with_logits", logits.value[keep])
    count = mask.sum()
    if count <= 0:
        raise DataError("masked cross-entropy over zero unmasked positions")

    targets = np.where(keep, targets, 0)
    values = np.where(keep[..., None], logits.value, 0).astype(logits.dtype, copy=False)
    shifted = values - values.max(axis=-1, keepdims=True)
    log_z = np.log(np.exp(shifted).sum(axis=-1))
    picked = np.take_along_axis(shifted, targets[..., None], axis=-1)[..., 0]
    nll = np.where(keep, log_z - picked, 0)
    loss = np.asarray((nll * mask).sum() / count, dtype=logits.dtype)

    def backward(g):
        probs = np.exp(shifted - log_z[..., None])
        np.put_along_axis(probs, targets[..., None],
                          np.take_along_axis(probs, targets[..., None], axis=-1) - 1, axis=-1)
        return (probs * (mask / count)[..., None] * g,)

    return _result(loss, (logits,), backward)


__all__ = [
    "add", "sub", "mul", "sum_all",
    "reshape", "transpose", "index", "concat", "stack",
    "matmul", "affine", "conv2d", "maxpool2d",
    "relu", "tanh", "sigmoid", "softmax",
    "embedding_gather", "dropout", "masked_cross_entropy_with_logits",
]
