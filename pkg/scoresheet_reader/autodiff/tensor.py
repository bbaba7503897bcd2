"""
Tensors, parameters and the gradient tape.

Operations only record onto a tape while one is active (``with Tape() as
tape:``). Backward walks the recorded nodes in reverse execution order, which
is a valid reverse topological order because every node is appended after its
inputs exist.
"""

from __future__ import annotations

from contextvars import ContextVar
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from scoresheet_reader.errors import BackwardError, ShapeError

BackwardFn = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]

_ACTIVE_TAPE: ContextVar[Optional["Tape"]] = ContextVar("active_tape", default=None)


class Tensor:
    """A numpy array plus the flag saying whether gradients flow into it."""

    __slots__ = ("value", "requires_grad", "name")

    def __init__(self, value, requires_grad: bool = False, name: Optional[str] = None):
        self.value = np.asarray(value)
        self.requires_grad = requires_grad
        self.name = name

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.value.shape

    @property
    def ndim(self) -> int:
        return self.value.ndim

    @property
    def dtype(self):
        return self.value.dtype

    def numpy(self) -> np.ndarray:
        return self.value

    def item(self) -> float:
        return float(self.value.reshape(-1)[0]) if self.value.size == 1 else float("nan")

    def __repr__(self):
        label = f" {self.name!r}" if self.name else ""
        return f"Tensor{label}(shape={self.shape}, dtype={self.dtype})"

    # Operator sugar; the implementations live in ops.
    def __add__(self, other):
        from scoresheet_reader.autodiff import ops
        return ops.add(self, other)

    def __sub__(self, other):
        from scoresheet_reader.autodiff import ops
        return ops.sub(self, other)

    def __mul__(self, other):
        from scoresheet_reader.autodiff import ops
        return ops.mul(self, other)

    def __matmul__(self, other):
        from scoresheet_reader.autodiff import ops
        return ops.matmul(self, other)


class Parameter(Tensor):
    """A trainable tensor carrying its gradient and Adam moments."""

    __slots__ = ("grad", "adam_m", "adam_v", "frozen")

    def __init__(self, value, name: str):
        super().__init__(np.array(value, copy=True), requires_grad=True, name=name)
        self.grad = np.zeros_like(self.value)
        self.adam_m = np.zeros_like(self.value)
        self.adam_v = np.zeros_like(self.value)
        self.frozen = False

    def zero_grad(self):
        self.grad.fill(0)

    def assign(self, value):
        """Overwrite the value in place, keeping shape and dtype."""
        value = np.asarray(value, dtype=self.value.dtype)
        if value.shape != self.value.shape:
            raise ShapeError("assign", value.shape, self.value.shape, detail=self.name)
        self.value[...] = value

    def __repr__(self):
        return f"Parameter({self.name!r}, shape={self.shape}, dtype={self.dtype})"


class _Node:
    __slots__ = ("output", "inputs", "backward_fn")

    def __init__(self, output: Tensor, inputs: Sequence[Tensor], backward_fn: BackwardFn):
        self.output = output
        self.inputs = tuple(inputs)
        self.backward_fn = backward_fn


class Tape:
    """Records primitive applications while active and replays them backwards.

    Calling ``backward`` twice on the same tape accumulates into
    ``Parameter.grad`` twice; reset gradients between steps with
    ``zero_grad``.
    """

    def __init__(self):
        self.nodes: List[_Node] = []
        self._grads: Dict[int, np.ndarray] = {}
        self._token = None

    def __enter__(self) -> "Tape":
        self._token = _ACTIVE_TAPE.set(self)
        return self

    def __exit__(self, exc_type, exc, tb):
        _ACTIVE_TAPE.reset(self._token)
        self._token = None
        return False

    def __len__(self):
        return len(self.nodes)

    def record(self, output: Tensor, inputs: Sequence[Tensor], backward_fn: BackwardFn):
        self.nodes.append(_Node(output, inputs, backward_fn))

    def backward(self, loss: Tensor):
        if loss.value.size != 1:
            raise BackwardError(f"backward needs a scalar loss, got shape {loss.shape}")
        grads: Dict[int, np.ndarray] = {id(loss): np.ones_like(loss.value)}
        if isinstance(loss, Parameter):
            loss.grad += 1
        produced = {id(node.output) for node in self.nodes}

        for node in reversed(self.nodes):
            upstream = grads.pop(id(node.output), None)
            if upstream is None:
                continue
            for tensor, grad in zip(node.inputs, node.backward_fn(upstream)):
                if grad is None or not tensor.requires_grad:
                    continue
                if isinstance(tensor, Parameter):
                    tensor.grad += grad
                    continue
                key = id(tensor)
                if key in grads:
                    grads[key] = grads[key] + grad
                else:
                    grads[key] = grad
        # Whatever is left belongs to leaf tensors that are not parameters.
        self._grads = {k: v for k, v in grads.items() if k not in produced}

    def grad_of(self, tensor: Tensor) -> np.ndarray:
        """Gradient reaching *tensor* in the last backward pass (zeros if none did)."""
        if isinstance(tensor, Parameter):
            return tensor.grad
        return self._grads.get(id(tensor), np.zeros_like(tensor.value))


def active_tape() -> Optional[Tape]:
    return _ACTIVE_TAPE.get()


def backward(tape: Tape, loss: Tensor):
    tape.backward(loss)


def as_tensor(value) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(np.asarray(value))


def zero_grad(params: Sequence[Parameter]):
    for p in params:
        p.zero_grad()


__all__ = ["Tensor", "Parameter", "Tape", "active_tape", "as_tensor", "backward", "zero_grad"]
