"""
Central finite-difference gradient checks.

``check_gradients`` compares tape gradients with ``(f(x+h) - f(x-h)) / 2h`` at
a few random entries of every input. Cases are run in float64; ReLU and
max-pool inputs are built away from their kinks.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from scoresheet_reader.autodiff import ops
from scoresheet_reader.autodiff.tensor import Parameter, Tape, Tensor
from scoresheet_reader.errors import GradientCheckError

TOLERANCE = 1e-4
STEP = 1e-5
# Gradients smaller than this are compared in absolute terms.
_FLOOR = 1e-6


@dataclass
class GradCheckResult:
    name: str
    max_rel_error: float
    checked: int
    passed: bool

    def to_dict(self) -> Dict[str, object]:
        return {"name": self.name, "max_rel_error": self.max_rel_error, "checked": self.checked,
                "passed": self.passed}


def relative_error(analytic: float, numeric: float) -> float:
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), _FLOOR)


def check_gradients(fn: Callable[[], Tensor], inputs: Sequence[Tensor], points: int = 10,
                    seed: int = 0, step: float = STEP) -> tuple:
    """Return ``(max relative error, entries checked)`` for scalar *fn* w.r.t. *inputs*.

    *fn* must rebuild its graph from the current values of *inputs* on each call.
    """
    for t in inputs:
        if isinstance(t, Parameter):
            t.zero_grad()
        else:
            t.requires_grad = True
    with Tape() as tape:
        loss = fn()
    tape.backward(loss)
    analytic = [np.array(tape.grad_of(t), dtype=np.float64, copy=True) for t in inputs]

    rng = np.random.default_rng(seed)
    worst, checked = 0.0, 0
    for tensor, grad in zip(inputs, analytic):
        flat = tensor.value.reshape(-1)
        picks = rng.choice(flat.size, size=min(points, flat.size), replace=False)
        for i in picks:
            original = flat[i]
            flat[i] = original + step
            plus = fn().item()
            flat[i] = original - step
            minus = fn().item()
            flat[i] = original
            numeric = (plus - minus) / (2 * step)
            worst = max(worst, relative_error(float(grad.reshape(-1)[i]), numeric))
            checked += 1
    return worst, checked


def projected(out: Tensor, weights: np.ndarray) -> Tensor:
    """Scalar ``sum(out * weights)``; random weights give every output entry its own gradient."""
    return ops.sum_all(ops.mul(out, Tensor(weights)))


# ---------------------------------------------------------------------------
# Primitive cases
# ---------------------------------------------------------------------------

def _away_from_zero(rng, shape):
    u = rng.uniform(-1, 1, size=shape)
    return np.sign(u) * (0.1 + np.abs(u))


def _distinct(rng, shape):
    # Values 0.01 apart, so no max-pool window ever has a near tie.
    return rng.permutation(np.prod(shape)).reshape(shape) * 0.01


def _leaf(rng, *shape, values=None):
    return Tensor(rng.normal(size=shape) if values is None else values)


def primitive_cases(seed: int = 0) -> Dict[str, tuple]:
    """Map case name -> (fn, inputs)."""
    rng = np.random.default_rng(seed)
    cases = {}

    def add_case(name, inputs, build):
        out_shape = build(*inputs).shape
        weights = rng.normal(size=out_shape)
        cases[name] = (lambda: projected(build(*inputs), weights), inputs)

    add_case("add", [_leaf(rng, 3, 4), _leaf(rng, 4)], ops.add)
    add_case("sub", [_leaf(rng, 3, 4), _leaf(rng, 3, 1)], ops.sub)
    add_case("mul", [_leaf(rng, 3, 4), _leaf(rng, 3, 4)], ops.mul)
    add_case("matmul", [_leaf(rng, 3, 4), _leaf(rng, 4, 5)], ops.matmul)
    add_case("matmul_batched", [_leaf(rng, 2, 3, 4), _leaf(rng, 4, 5)], ops.matmul)
    add_case("matmul_batch_pairs", [_leaf(rng, 2, 3, 4), _leaf(rng, 2, 4, 5)], ops.matmul)
    add_case("affine", [_leaf(rng, 2, 3, 4), _leaf(rng, 4, 5), _leaf(rng, 5)], ops.affine)
    add_case("conv2d", [_leaf(rng, 2, 2, 6, 7), _leaf(rng, 3, 2, 3, 3), _leaf(rng, 3)], ops.conv2d)
    add_case("conv2d_stride2", [_leaf(rng, 1, 2, 7, 8), _leaf(rng, 2, 2, 3, 3), _leaf(rng, 2)],
             lambda x, w, b: ops.conv2d(x, w, b, stride=2))
    add_case("maxpool2d", [_leaf(rng, values=_distinct(rng, (2, 2, 5, 6)))], ops.maxpool2d)
    add_case("relu", [_leaf(rng, values=_away_from_zero(rng, (4, 5)))], ops.relu)
    add_case("tanh", [_leaf(rng, 4, 5)], ops.tanh)
    add_case("sigmoid", [_leaf(rng, 4, 5)], ops.sigmoid)
    add_case("softmax", [_leaf(rng, 3, 6)], ops.softmax)
    add_case("concat", [_leaf(rng, 2, 3), _leaf(rng, 2, 4)], lambda a, b: ops.concat([a, b], axis=-1))
    add_case("stack", [_leaf(rng, 2, 3), _leaf(rng, 2, 3)], lambda a, b: ops.stack([a, b], axis=1))
    add_case("index", [_leaf(rng, 2, 5, 3)], lambda x: ops.index(x, (slice(None), 2)))
    add_case("reshape", [_leaf(rng, 2, 6)], lambda x: ops.reshape(x, (3, 4)))
    add_case("transpose", [_leaf(rng, 2, 3, 4)], lambda x: ops.transpose(x, (0, 2, 1)))
    codes = np.array([[0, 2, 2], [4, 1, 0]])
    add_case("embedding_gather", [_leaf(rng, 5, 3)], lambda t: ops.embedding_gather(t, codes))
    add_case("dropout", [_leaf(rng, 4, 6)],
             lambda x: ops.dropout(x, 0.3, train=True, rng=np.random.default_rng(7)))

    logits = _leaf(rng, 2, 4, 5)
    targets = rng.integers(0, 5, size=(2, 4))
    mask = np.array([[1, 1, 1, 0], [1, 1, 0, 0]], dtype=np.float64)
    cases["masked_cross_entropy"] = (
        lambda: ops.masked_cross_entropy_with_logits(logits, targets, mask), [logits])
    return cases


def run_cases(cases: Dict[str, tuple], points: int = 10, seed: int = 0) -> List[GradCheckResult]:
    results = []
    for name, (fn, inputs) in cases.items():
        worst, checked = check_gradients(fn, inputs, points=points, seed=seed)
        results.append(GradCheckResult(name, worst, checked, worst < TOLERANCE))
    return results


def raise_on_failure(results: Sequence[GradCheckResult]):
    failed = [r for r in results if not r.passed]
    if failed:
        worst: Optional[GradCheckResult] = max(failed, key=lambda r: r.max_rel_error)
        raise GradientCheckError(f"{len(failed)} gradient check(s) failed; worst {worst.name} "
                                 f"at relative error {worst.max_rel_error:.3e}")


__all__ = ["GradCheckResult", "check_gradients", "primitive_cases", "projected", "raise_on_failure",
           "relative_error", "run_cases", "TOLERANCE"]
