"""
Mini-batch training loop.

Models plug in through three methods: ``collate(samples) -> Batch``,
``training_logits(batch, teacher_forcing, train, rng)`` and
``predict(batch)``. Accuracy during training is per-position argmax accuracy
over non-PAD positions; convergence is judged once per epoch on the training
means.
"""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from scoresheet_reader.autodiff import ops
from scoresheet_reader.autodiff.optim import Adam, clip_grad_norm, global_grad_norm
from scoresheet_reader.autodiff.tensor import Tape, zero_grad
from scoresheet_reader.config.presets import dataclass_from_dict
from scoresheet_reader.errors import ConfigError, DataError, NumericError
from scoresheet_reader.utils import Logger


@dataclass
class TrainConfig:
    batch_size: int = 16
    lr: float = 0.0005
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-7
    dropout: float = 0.2
    teacher_forcing: bool = True
    convergence_loss: float = 0.25
    convergence_acc: float = 0.9
    max_epochs: int = 50
    val_fraction: float = 0.2
    clip_norm: float = 5.0  # 0 disables clipping
    eval_test_every: int = 0  # 0 = never evaluate the test set during fit
    stop_on_convergence: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.batch_size < 1:
            raise ConfigError(f"train.batch_size must be >= 1, got {self.batch_size}")
        if self.max_epochs < 1:
            raise ConfigError(f"train.max_epochs must be >= 1, got {self.max_epochs}")
        if not 0.0 <= self.val_fraction < 1.0:
            raise ConfigError(f"train.val_fraction must lie in [0, 1), got {self.val_fraction}")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError(f"train.dropout must lie in [0, 1), got {self.dropout}")
        if self.lr < 0:
            raise ConfigError("train.lr must be >= 0")

    @property
    def fractions(self) -> Tuple[float, float]:
        return 1.0 - self.val_fraction, self.val_fraction

    @staticmethod
    def from_dict(data: Dict[str, Any]) -> "TrainConfig":
        return dataclass_from_dict(TrainConfig, data, "train")

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass
class EpochStats:
    epoch: int
    train_loss: float
    val_loss: Optional[float]
    train_acc: float
    val_acc: Optional[float]
    test_acc: Optional[float] = None
    wall_time: float = 0.0


@dataclass
class FitResult:
    history: List[EpochStats] = field(default_factory=list)
    converged: bool = False
    converged_epoch: Optional[int] = None

    @property
    def epochs_run(self) -> int:
        return len(self.history)

    @property
    def max_gap(self) -> float:
        gaps = [s.val_loss - s.train_loss for s in self.history if s.val_loss is not None]
        return max(gaps, default=0.0)

    @property
    def final(self) -> Optional[EpochStats]:
        return self.history[-1] if self.history else None


def split_dataset(items: Sequence, fractions: Tuple[float, float] = (0.8, 0.2), seed: int = 0) -> Tuple[list, list]:
    """Seeded shuffle, then cut into a training and a validation part."""
    if len(fractions) != 2 or min(fractions) < 0 or abs(sum(fractions) - 1.0) > 1e-9:
        raise ConfigError(f"split fractions must be two non-negative numbers summing to 1, got {fractions}")
    if not items:
        raise DataError("cannot split an empty dataset")
    order = np.random.default_rng(seed).permutation(len(items))
    n_train = int(round(len(items) * fractions[0]))
    return [items[i] for i in order[:n_train]], [items[i] for i in order[n_train:]]


def _batches(items: Sequence, batch_size: int, order=None):
    order = range(len(items)) if order is None else order
    order = list(order)
    for start in range(0, len(order), batch_size):
        yield [items[i] for i in order[start:start + batch_size]]


def _correct(logits: np.ndarray, targets: np.ndarray, mask: np.ndarray) -> float:
    return float(((logits.argmax(axis=-1) == targets) * mask).sum())


def train_epoch(model, train_set: Sequence, cfg: TrainConfig, optimizer: Adam, epoch: int) -> Tuple[float, float]:
    """One shuffled pass; returns the position-weighted mean (loss, accuracy)."""
    if not train_set:
        raise DataError("training set is empty")
    order = np.random.default_rng([cfg.seed, epoch]).permutation(len(train_set))
    dropout_rng = np.random.default_rng([cfg.seed, epoch, 1])
    params = model.trainable_parameters()
    loss_sum = correct = positions = 0.0
    for index, samples in enumerate(_batches(train_set, cfg.batch_size, order)):
        batch = model.collate(samples)
        zero_grad(params)
        try:
            with Tape() as tape:
                logits = model.training_logits(batch, cfg.teacher_forcing, True, dropout_rng)
                loss = ops.masked_cross_entropy_with_logits(logits, batch.targets, batch.mask)
        except NumericError as exc:
            raise NumericError(f"training aborted: {exc}", epoch=epoch, batch=index) from exc
        value = loss.item()
        if not np.isfinite(value):
            raise NumericError("training aborted: non-finite loss", epoch=epoch, batch=index, loss=value)
        tape.backward(loss)
        norm = clip_grad_norm(params, cfg.clip_norm) if cfg.clip_norm > 0 else global_grad_norm(params)
        if not np.isfinite(norm):
            raise NumericError(f"training aborted: gradient norm {norm}", epoch=epoch, batch=index)
        optimizer.step(params)

        count = float(batch.mask.sum())
        loss_sum += value * count
        correct += _correct(logits.value, batch.targets, batch.mask)
        positions += count
    return loss_sum / positions, correct / positions


def evaluate_loss(model, samples: Sequence, cfg: TrainConfig) -> Tuple[float, float]:
    """Eval-mode loss and accuracy, decoding the same way training does."""
    loss_sum = correct = positions = 0.0
    for chunk in _batches(samples, cfg.batch_size):
        batch = model.collate(chunk)
        logits = model.training_logits(batch, cfg.teacher_forcing, False, None)
        loss = ops.masked_cross_entropy_with_logits(logits, batch.targets, batch.mask)
        count = float(batch.mask.sum())
        loss_sum += loss.item() * count
        correct += _correct(logits.value, batch.targets, batch.mask)
        positions += count
    return loss_sum / positions, correct / positions


def free_running_scores(model, samples: Sequence, batch_size: int = 16) -> Tuple[float, float]:
    """(position accuracy, first-position accuracy) of greedy reads against the target moves."""
    if not samples:
        raise DataError("cannot score an empty sample set")
    correct = positions = first = 0
    for chunk in _batches(samples, batch_size):
        batch = model.collate(chunk)
        predictions = model.predict(batch).predictions
        for pred, target in zip(predictions, batch.move_codes()):
            correct += sum(1 for p, t in zip(pred, target) if p == t)
            positions += len(target)
            first += int(bool(pred) and bool(target) and pred[0] == target[0])
    return correct / positions, first / len(samples)


def is_converged(stats: EpochStats, cfg: TrainConfig) -> bool:
    return stats.train_loss <= cfg.convergence_loss or stats.train_acc >= cfg.convergence_acc


def fit(model, train_set: Sequence, val_set: Sequence, cfg: TrainConfig, test_set: Sequence = (),
        history=None, optimizer: Optional[Adam] = None) -> FitResult:
    """Train until the convergence criterion holds on training data or ``max_epochs`` run out."""
    if hasattr(model, "config"):
        model.config.dropout_rate = cfg.dropout
    optimizer = optimizer or Adam(cfg.lr, cfg.beta1, cfg.beta2, cfg.eps)
    result = FitResult()
    for epoch in range(1, cfg.max_epochs + 1):
        started = time.perf_counter()
        train_loss, train_acc = train_epoch(model, train_set, cfg, optimizer, epoch)
        val_loss = val_acc = None
        if val_set:
            val_loss, val_acc = evaluate_loss(model, val_set, cfg)
        test_acc = None
        if test_set and cfg.eval_test_every and epoch % cfg.eval_test_every == 0:
            test_acc = free_running_scores(model, test_set, cfg.batch_size)[0]
        stats = EpochStats(epoch, train_loss, val_loss, train_acc, val_acc, test_acc,
                           time.perf_counter() - started)
        result.history.append(stats)
        if history is not None:
            history.add_entry(stats)
        Logger.info(f"epoch {epoch}: train loss {train_loss:.4f} acc {train_acc:.4f}"
                    + (f" | val loss {val_loss:.4f} acc {val_acc:.4f}" if val_loss is not None else "")
                    + (f" | test acc {test_acc:.4f}" if test_acc is not None else ""))
        if is_converged(stats, cfg):
            if not result.converged:
                result.converged, result.converged_epoch = True, epoch
            if cfg.stop_on_convergence:
                break
    Logger.info(f"fit finished after {result.epochs_run} epoch(s), "
                + (f"converged at epoch {result.converged_epoch}" if result.converged else "not converged"))
    return result


__all__ = ["EpochStats", "FitResult", "TrainConfig", "evaluate_loss", "fit", "free_running_scores",
           "is_converged", "split_dataset", "train_epoch"]
