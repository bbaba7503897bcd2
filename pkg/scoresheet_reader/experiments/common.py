"""
Run plumbing shared by the train, ablate, sweep and incremental commands.

A run is a pure function of its resolved configuration dict: every seed it
uses is split off the top-level ``seed`` with ``derive_seed`` so the training
data, the held-out test data, the initial parameters and the batch order
never share draws.
"""

from __future__ import annotations

import copy
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

from scoresheet_reader.core.notation import GameRecord, load_pgn_file
from scoresheet_reader.core.vocabulary import Vocabulary, build_vocabulary
from scoresheet_reader.errors import ConfigError
from scoresheet_reader.evaluation.evaluate import EvaluationResult, evaluate_model
from scoresheet_reader.evaluation.export import export_attention_map
from scoresheet_reader.model.checkpoint import save_checkpoint
from scoresheet_reader.model.config import ModelConfig
from scoresheet_reader.model.network import ScoresheetModel
from scoresheet_reader.services.managers import RESOLVED_CONFIG_FILE, CurveHistory
from scoresheet_reader.synth.dataset import DatasetSpec, SampleManifest, build_templates, derive_seed, generate_dataset
from scoresheet_reader.training.trainer import FitResult, TrainConfig, fit, split_dataset
from scoresheet_reader.utils import FileManager, Logger
from scoresheet_reader.utils.paths import ensure_dir, get_data_dir

CHECKPOINT_FILE = "checkpoint.bin"
VOCABULARY_FILE = "vocabulary.tsv"
METRICS_FILE = "metrics.json"
ATTENTION_DIR = "attention"

# derive_seed streams of one run
TRAIN_DATA_STREAM = 10
TEST_DATA_STREAM = 11
INIT_STREAM = 12
ORDER_STREAM = 13
SPLIT_STREAM = 14


@dataclass
class RunSeeds:
    train_data: int
    test_data: int
    init: int
    order: int
    split: int

    @staticmethod
    def from_master(seed: int) -> "RunSeeds":
        return RunSeeds(derive_seed(seed, TRAIN_DATA_STREAM), derive_seed(seed, TEST_DATA_STREAM),
                        derive_seed(seed, INIT_STREAM), derive_seed(seed, ORDER_STREAM),
                        derive_seed(seed, SPLIT_STREAM))


class RunContext:
    """Corpus, vocabulary and templates for one resolved configuration."""

    def __init__(self, cfg: Dict[str, Any]):
        self.cfg = cfg
        corpus_cfg = cfg["corpus"]
        self.corpus = load_corpus(corpus_cfg["pgn"])
        cap = int(corpus_cfg.get("vocab_cap", 0)) or None
        self.vocabulary = build_vocabulary(self.corpus, int(corpus_cfg["positions"]), cap)
        self.seeds = RunSeeds.from_master(int(cfg["seed"]))
        self.dataset_spec = dataset_spec(cfg, seed=self.seeds.train_data)
        self.templates = build_templates(self.corpus, self.vocabulary, self.dataset_spec.sequence_length)

    @property
    def test_spec(self) -> DatasetSpec:
        return held_out_spec(self.cfg, self.dataset_spec, self.seeds.test_data)

    def train_config(self) -> TrainConfig:
        return TrainConfig.from_dict({**self.cfg["train"], "seed": self.seeds.order})

    def model_config(self) -> ModelConfig:
        return model_config(self.cfg, self.dataset_spec, self.vocabulary, self.seeds.init)

    def build_model(self) -> ScoresheetModel:
        return ScoresheetModel(self.model_config())

    def generate(self, spec: DatasetSpec, jobs: int = 1, out_dir=None) -> List[SampleManifest]:
        return generate_dataset(spec, self.vocabulary, self.templates, out_dir, jobs)


def load_corpus(name: str) -> List[GameRecord]:
    """Read a PGN corpus; bare file names are looked up in the data directory."""
    path = Path(name)
    if not path.is_absolute() and not path.exists():
        path = get_data_dir() / name
    if not path.exists():
        raise ConfigError(f"corpus file not found: {name}")
    return load_pgn_file(path)


def dataset_spec(cfg: Dict[str, Any], **overrides) -> DatasetSpec:
    return DatasetSpec.from_dict({**cfg["dataset"], **overrides})


def held_out_spec(cfg: Dict[str, Any], train_spec: DatasetSpec, seed: int) -> DatasetSpec:
    """Held-out writers: same layout and length, disjoint style seeds, its own sample seeds."""
    ev = cfg["eval"]
    return replace(train_spec, size=int(ev["test_size"]), style_seed_start=int(ev["test_style_seed_start"]),
                   source=ev["test_source"], seed=seed)


def model_config(cfg: Dict[str, Any], spec: DatasetSpec, vocabulary: Vocabulary, init_seed: int) -> ModelConfig:
    width, height = spec.build_layout().image_size
    if spec.half_resolution:
        width, height = width // 2, height // 2
    section = dict(cfg["model"])
    section["max_decode_len"] = int(section.get("max_decode_len", 0)) or spec.sequence_length + 1
    return ModelConfig.from_dict({**section, "image_size": (width, height), "vocab_size": len(vocabulary),
                                  "dropout_rate": float(cfg["train"]["dropout"]), "init_seed": init_seed})


@dataclass
class RunSummary:
    name: str
    seed: int
    status: str = "ok"
    converged: bool = False
    epochs_to_converge: Optional[int] = None
    epochs_run: int = 0
    max_gap: Optional[float] = None
    final_train_loss: Optional[float] = None
    final_train_acc: Optional[float] = None
    final_val_acc: Optional[float] = None
    test_accuracy: Optional[float] = None
    first_position_accuracy: Optional[float] = None
    cer: Optional[float] = None
    hit_rate: Optional[float] = None
    entropy: Optional[float] = None
    chance_hit_rate: Optional[float] = None
    error: str = ""

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @staticmethod
    def failed(name: str, seed: int, error: str) -> "RunSummary":
        return RunSummary(name, seed, status="failed", error=error)

    @staticmethod
    def from_fit(name: str, seed: int, outcome: FitResult, evaluation: EvaluationResult,
                 max_epochs: int) -> "RunSummary":
        final = outcome.final
        metrics = evaluation.metrics
        return RunSummary(
            name, seed,
            converged=outcome.converged,
            # A run that never converges counts as one epoch past its budget.
            epochs_to_converge=outcome.converged_epoch if outcome.converged else max_epochs + 1,
            epochs_run=outcome.epochs_run,
            max_gap=outcome.max_gap,
            final_train_loss=final.train_loss if final else None,
            final_train_acc=final.train_acc if final else None,
            final_val_acc=final.val_acc if final else None,
            test_accuracy=metrics.position_accuracy,
            first_position_accuracy=metrics.first_position_accuracy,
            cer=metrics.cer,
            hit_rate=evaluation.alignment.hit_rate,
            entropy=evaluation.alignment.mean_entropy,
            chance_hit_rate=evaluation.chance_hit_rate,
        )


def save_run_artifacts(out_dir, cfg: Dict[str, Any], model: ScoresheetModel, context: RunContext,
                       test_set: Sequence[SampleManifest], evaluation: EvaluationResult) -> Path:
    out_dir = ensure_dir(out_dir)
    FileManager.save_json(cfg, out_dir / RESOLVED_CONFIG_FILE)
    context.vocabulary.save(out_dir / VOCABULARY_FILE)
    save_checkpoint(model, out_dir / CHECKPOINT_FILE, context.vocabulary.digest())
    FileManager.save_json(evaluation.to_dict(), out_dir / METRICS_FILE)
    samples = int(cfg["eval"].get("attention_samples", 1))
    for i in range(min(samples, len(test_set))):
        target = out_dir / ATTENTION_DIR if samples == 1 else out_dir / ATTENTION_DIR / f"sample_{i:03d}"
        export_attention_map(evaluation.attention[i], model.config.grid, test_set[i].load_pixels(), target)
    return out_dir


def run_training(cfg: Dict[str, Any], out_dir=None, name: str = "run", jobs: int = 1) -> RunSummary:
    """Generate data, fit, evaluate on held-out writers and (optionally) write the run directory."""
    context = RunContext(cfg)
    seed = int(cfg["seed"])
    Logger.info(f"Run {name!r} (seed {seed}): {context.dataset_spec.size} samples, "
                f"vocabulary {len(context.vocabulary)}, length {context.dataset_spec.sequence_length}")
    samples = context.generate(context.dataset_spec, jobs)
    test_set = context.generate(context.test_spec, jobs)
    train_cfg = context.train_config()
    if train_cfg.val_fraction > 0:
        train_set, val_set = split_dataset(samples, train_cfg.fractions, context.seeds.split)
    else:
        train_set, val_set = list(samples), []

    model = context.build_model()
    history = CurveHistory(out_dir)
    history.write_header(cfg, asdict(context.seeds), context.dataset_spec.content_hash())
    outcome = fit(model, train_set, val_set, train_cfg, test_set, history)
    evaluation = evaluate_model(model, test_set, context.vocabulary, float(cfg["eval"]["tolerance_px"]),
                                train_cfg.batch_size)
    if out_dir is not None:
        save_run_artifacts(out_dir, cfg, model, context, test_set, evaluation)
    return RunSummary.from_fit(name, seed, outcome, evaluation, train_cfg.max_epochs)


RunTask = Tuple[str, Dict[str, Any], Optional[str]]


def _run_task(task: RunTask) -> RunSummary:
    name, cfg, out_dir = task
    try:
        return run_training(cfg, out_dir, name)
    except Exception as e:
        Logger.error(f"Run {name!r} (seed {cfg.get('seed')}) failed: {e}")
        Logger.debug(traceback.format_exc())
        return RunSummary.failed(name, int(cfg.get("seed", 0)), f"{type(e).__name__}: {e}")


def run_many(tasks: Sequence[RunTask], jobs: int = 1) -> List[RunSummary]:
    """Execute independent runs, in parallel processes when ``jobs > 1``; results keep task order."""
    tasks = [(name, copy.deepcopy(cfg), None if out is None else str(out)) for name, cfg, out in tasks]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as executor:
            return list(executor.map(_run_task, tasks))
    return [_run_task(task) for task in tasks]


def set_dotted(cfg: Dict[str, Any], dotted: str, value: Any) -> None:
    node = cfg
    parts = dotted.split(".")
    for part in parts[:-1]:
        node = node[part]
    if parts[-1] not in node:
        raise ConfigError(f"unknown config key {dotted!r}")
    node[parts[-1]] = value


__all__ = [
    "ATTENTION_DIR",
    "CHECKPOINT_FILE",
    "METRICS_FILE",
    "VOCABULARY_FILE",
    "RunContext",
    "RunSeeds",
    "RunSummary",
    "dataset_spec",
    "held_out_spec",
    "load_corpus",
    "model_config",
    "run_many",
    "run_training",
    "save_run_artifacts",
    "set_dotted",
]
