"""
Network building blocks on top of the autodiff ops.
"""

from __future__ import annotations

from typing import Iterator, List, Optional, Sequence, Tuple

import numpy as np

from scoresheet_reader.autodiff import ops
from scoresheet_reader.autodiff.optim import glorot_uniform
from scoresheet_reader.autodiff.tensor import Parameter, Tensor


class Module:
    """Owns parameters and child modules, both kept in registration order."""

    def __init__(self, name: str):
        self.name = name
        self._params: List[Parameter] = []
        self._children: List["Module"] = []

    def param(self, suffix: str, value: np.ndarray) -> Parameter:
        p = Parameter(value, f"{self.name}.{suffix}")
        self._params.append(p)
        return p

    def child(self, module: "Module") -> "Module":
        self._children.append(module)
        return module

    def parameters(self) -> List[Parameter]:
        return list(self._iter_params())

    def _iter_params(self) -> Iterator[Parameter]:
        yield from self._params
        for c in self._children:
            yield from c._iter_params()

    def set_frozen(self, frozen: bool):
        for p in self.parameters():
            p.frozen = frozen


class Linear(Module):
    def __init__(self, name: str, in_dim: int, out_dim: int, rng: np.random.Generator, dtype=np.float32):
        super().__init__(name)
        self.weight = self.param("weight", glorot_uniform(rng, (in_dim, out_dim), in_dim, out_dim, dtype))
        self.bias = self.param("bias", np.zeros(out_dim, dtype=dtype))

    def __call__(self, x: Tensor) -> Tensor:
        return ops.affine(x, self.weight, self.bias)


class Conv2d(Module):
    def __init__(self, name: str, in_channels: int, out_channels: int, rng: np.random.Generator,
                 kernel: int = 3, stride: int = 1, dtype=np.float32):
        super().__init__(name)
        shape = (out_channels, in_channels, kernel, kernel)
        self.stride = stride
        self.weight = self.param("weight", glorot_uniform(rng, shape, in_channels * kernel * kernel,
                                                          out_channels * kernel * kernel, dtype))
        self.bias = self.param("bias", np.zeros(out_channels, dtype=dtype))

    def __call__(self, x: Tensor) -> Tensor:
        return ops.conv2d(x, self.weight, self.bias, self.stride)


class ConvBackbone(Module):
    """Blocks of 3x3 valid convolution, ReLU and 2x2 max pooling."""

    def __init__(self, channels: Sequence[int], rng: np.random.Generator, in_channels: int = 1, dtype=np.float32):
        super().__init__("backbone")
        self.convs = []
        prev = in_channels
        for i, ch in enumerate(channels):
            self.convs.append(self.child(Conv2d(f"backbone.conv{i}", prev, ch, rng, dtype=dtype)))
            prev = ch
        self.out_channels = prev

    def __call__(self, x: Tensor) -> Tensor:
        for conv in self.convs:
            x = ops.maxpool2d(ops.relu(conv(x)))
        return x


class Embedding(Module):
    def __init__(self, name: str, vocab_size: int, dim: int, rng: np.random.Generator, dtype=np.float32):
        super().__init__(name)
        self.table = self.param("table", glorot_uniform(rng, (vocab_size, dim), vocab_size, dim, dtype))

    def __call__(self, codes) -> Tensor:
        return ops.embedding_gather(self.table, codes)


class GRUCell(Module):
    """Gated recurrent unit with the reset gate applied after the recurrent projection.

        z = sigmoid(x Wz + bz + h Uz)
        r = sigmoid(x Wr + br + h Ur)
        n = tanh(x Wn + bn + r * (h Un + bhn))
        h' = n + z * (h - n)

    With every parameter zero this gives z = 0.5, n = 0 and h' = 0.5 h.
    """

    def __init__(self, name: str, input_dim: int, hidden_dim: int, rng: np.random.Generator, dtype=np.float32):
        super().__init__(name)
        self.hidden_dim = hidden_dim
        self.input_gates = [self.child(Linear(f"{name}.input_{g}", input_dim, hidden_dim, rng, dtype))
                            for g in "zrn"]

        def square(suffix):
            return self.param(suffix, glorot_uniform(rng, (hidden_dim, hidden_dim), hidden_dim, hidden_dim, dtype))

        self.u_z = square("recurrent_z")
        self.u_r = square("recurrent_r")
        self.u_n = square("recurrent_n")
        self.b_hn = self.param("recurrent_n_bias", np.zeros(hidden_dim, dtype=dtype))

    def project_inputs(self, x: Tensor) -> Tuple[Tensor, Tensor, Tensor]:
        """Input projections for every position at once: x (..., input_dim)."""
        return tuple(gate(x) for gate in self.input_gates)

    def step(self, projected: Sequence[Tensor], h: Tensor) -> Tensor:
        xz, xr, xn = projected
        z = ops.sigmoid(ops.add(xz, ops.matmul(h, self.u_z)))
        r = ops.sigmoid(ops.add(xr, ops.matmul(h, self.u_r)))
        n = ops.tanh(ops.add(xn, ops.mul(r, ops.affine(h, self.u_n, self.b_hn))))
        return ops.add(n, ops.mul(z, ops.sub(h, n)))

    def __call__(self, x: Tensor, h: Tensor) -> Tensor:
        return self.step(self.project_inputs(x), h)

    def run(self, sequence: Tensor, h0: Tensor, reverse: bool = False) -> Tuple[List[Tensor], Tensor]:
        """Unroll over axis 1 of *sequence* (B, L, input_dim); outputs come back in sequence order."""
        projected = self.project_inputs(sequence)
        length = sequence.shape[1]
        order = range(length - 1, -1, -1) if reverse else range(length)
        outputs: List[Optional[Tensor]] = [None] * length
        h = h0
        for t in order:
            h = self.step([ops.index(p, (slice(None), t)) for p in projected], h)
            outputs[t] = h
        return outputs, h


class AdditiveAttention(Module):
    """e_i = v . tanh(W_q q + W_k k_i + b); alpha = softmax(e); context = sum_i alpha_i k_i."""

    def __init__(self, name: str, query_dim: int, key_dim: int, attention_dim: int, rng: np.random.Generator,
                 dtype=np.float32):
        super().__init__(name)
        self.query = self.child(Linear(f"{name}.query", query_dim, attention_dim, rng, dtype))
        self.key = self.param("key_weight", glorot_uniform(rng, (key_dim, attention_dim), key_dim, attention_dim,
                                                           dtype))
        self.score = self.param("score", glorot_uniform(rng, (attention_dim, 1), attention_dim, 1, dtype))

    def precompute_keys(self, memory: Tensor) -> Tensor:
        return ops.matmul(memory, self.key)

    def scores(self, query: Tensor, keys: Tensor) -> Tensor:
        batch, length, dim = keys.shape
        q = ops.reshape(self.query(query), (batch, 1, dim))
        e = ops.matmul(ops.tanh(ops.add(keys, q)), self.score)
        return ops.reshape(e, (batch, length))

    def __call__(self, query: Tensor, memory: Tensor, keys: Optional[Tensor] = None) -> Tuple[Tensor, Tensor]:
        if keys is None:
            keys = self.precompute_keys(memory)
        return context_from_scores(self.scores(query, keys), memory)


def context_from_scores(scores: Tensor, memory: Tensor) -> Tuple[Tensor, Tensor]:
    """Softmax the (B, L) scores and average the (B, L, D) memory with them."""
    batch, length = scores.shape
    alpha = ops.softmax(scores)
    context = ops.matmul(ops.reshape(alpha, (batch, 1, length)), memory)
    return ops.reshape(context, (batch, memory.shape[-1])), alpha


__all__ = ["AdditiveAttention", "ConvBackbone", "Conv2d", "Embedding", "GRUCell", "Linear", "Module",
           "context_from_scores"]
