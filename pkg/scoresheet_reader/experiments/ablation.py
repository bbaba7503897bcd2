"""
Factor ablation suite.

Config (a) is the reference; every other config changes exactly the factors
listed in ``ABLATION_FACTORS``. All configs share the seed list, and a given
seed gives every config the same samples (a reduced set is a prefix of the
full one). Expected directions are judged by seed majority.
"""

from __future__ import annotations

import copy
import operator
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

from scoresheet_reader.config.presets import ABLATION_FACTORS, dataclass_from_dict
from scoresheet_reader.errors import ConfigError
from scoresheet_reader.experiments.baseline import BaselineSpec, recognition_lift, run_predictability_baseline
from scoresheet_reader.experiments.common import RunContext, RunSummary, run_many, set_dotted
from scoresheet_reader.utils import FileManager, Logger
from scoresheet_reader.utils.paths import ensure_dir

ABLATION_FILE = "ablation.csv"
DIRECTIONS_FILE = "directions.csv"
REFERENCE = "a"

ABLATION_COLUMNS = ("config", "seed", "status", "epochs_to_converge", "converged", "max_gap", "test_accuracy",
                    "hit_rate", "entropy", "chance_hit_rate", "first_position_accuracy", "cer",
                    "recognition_lift", "error")


@dataclass
class AblationSuite:
    configs: str = "abcdef"
    seeds: List[int] = field(default_factory=lambda: [0, 1, 2])
    reduced_fraction: float = 0.4

    def __post_init__(self):
        unknown = sorted(set(self.configs) - set(ABLATION_FACTORS))
        if unknown:
            raise ConfigError(f"unknown ablation config(s): {', '.join(unknown)}")
        if not self.seeds:
            raise ConfigError("suite.seeds needs at least one seed")
        if not 0.0 < self.reduced_fraction <= 1.0:
            raise ConfigError(f"suite.reduced_fraction must lie in (0, 1], got {self.reduced_fraction}")

    @staticmethod
    def from_dict(data: Dict[str, Any]) -> "AblationSuite":
        return dataclass_from_dict(AblationSuite, data, "suite")


@dataclass(frozen=True)
class DirectionCheck:
    name: str
    config: str
    other: str
    metric: str
    relation: str  # ">" or "<": config's metric versus other's


DIRECTION_CHECKS = (
    DirectionCheck("b_converges_slower_than_a", "b", "a", "epochs_to_converge", ">"),
    DirectionCheck("c_gap_larger_than_a", "c", "a", "max_gap", ">"),
    DirectionCheck("c_hit_rate_lower_than_a", "c", "a", "hit_rate", "<"),
    DirectionCheck("d_hit_rate_higher_than_c", "d", "c", "hit_rate", ">"),
    DirectionCheck("d_test_accuracy_higher_than_c", "d", "c", "test_accuracy", ">"),
    DirectionCheck("e_test_accuracy_lower_than_a", "e", "a", "test_accuracy", "<"),
    DirectionCheck("f_converges_slower_than_e", "f", "e", "epochs_to_converge", ">"),
    DirectionCheck("f_hit_rate_higher_than_e", "f", "e", "hit_rate", ">"),
)

_RELATIONS = {">": operator.gt, "<": operator.lt}


@dataclass
class DirectionResult:
    name: str
    votes: int
    compared: int
    passed: bool

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass
class AblationResult:
    rows: List[RunSummary]
    directions: List[DirectionResult]
    lifts: Dict[int, float] = field(default_factory=dict)  # seed -> recognition lift of config (a)

    @property
    def failures(self) -> List[RunSummary]:
        return [r for r in self.rows if r.status != "ok"]

    def direction(self, name: str) -> DirectionResult:
        for d in self.directions:
            if d.name == name:
                return d
        raise KeyError(name)


def ablation_config(base: Dict[str, Any], name: str, suite: AblationSuite) -> Dict[str, Any]:
    """The resolved config of ablation *name*: the reference with its factors applied."""
    if name not in ABLATION_FACTORS:
        raise ConfigError(f"unknown ablation config {name!r}")
    cfg = copy.deepcopy(base)
    for dotted, value in ABLATION_FACTORS[name].items():
        if value == "reduced":
            value = max(1, int(round(cfg["dataset"]["size"] * suite.reduced_fraction)))
        set_dotted(cfg, dotted, value)
    return cfg


def config_diff(reference: Dict[str, Any], other: Dict[str, Any], prefix: str = "") -> Dict[str, Tuple[Any, Any]]:
    """Dotted keys whose values differ, mapped to (reference, other)."""
    diff = {}
    for key in sorted(set(reference) | set(other)):
        dotted = f"{prefix}{key}"
        a, b = reference.get(key), other.get(key)
        if isinstance(a, dict) and isinstance(b, dict):
            diff.update(config_diff(a, b, dotted + "."))
        elif a != b:
            diff[dotted] = (a, b)
    return diff


def evaluate_directions(rows: Sequence[RunSummary], checks: Sequence[DirectionCheck] = DIRECTION_CHECKS
                        ) -> List[DirectionResult]:
    """Majority vote per check over the seeds where both configs finished."""
    by_key = {(r.name, r.seed): r for r in rows if r.status == "ok"}
    seeds = sorted({r.seed for r in rows})
    results = []
    for check in checks:
        relation = _RELATIONS[check.relation]
        votes = compared = 0
        for seed in seeds:
            mine, theirs = by_key.get((check.config, seed)), by_key.get((check.other, seed))
            if mine is None or theirs is None:
                continue
            a, b = getattr(mine, check.metric), getattr(theirs, check.metric)
            if a is None or b is None:
                continue
            compared += 1
            votes += int(relation(a, b))
        results.append(DirectionResult(check.name, votes, compared, compared > 0 and 2 * votes > compared))
    return results


def _row(summary: RunSummary, lift: Optional[float]) -> Tuple:
    data = summary.to_dict()

    def cell(key):
        value = data[key]
        if value is None:
            return ""
        return f"{value:.9g}" if isinstance(value, float) else value

    return (summary.name, summary.seed, summary.status, cell("epochs_to_converge"), summary.converged,
            cell("max_gap"), cell("test_accuracy"), cell("hit_rate"), cell("entropy"), cell("chance_hit_rate"),
            cell("first_position_accuracy"), cell("cer"), "" if lift is None else f"{lift:.9g}", summary.error)


def reference_lifts(base: Dict[str, Any], rows: Sequence[RunSummary]) -> Dict[int, float]:
    """Recognition lift of every finished reference run over a decoder-only model trained on its sequence source."""
    lifts = {}
    for summary in rows:
        if summary.name != REFERENCE or summary.status != "ok":
            continue
        cfg = copy.deepcopy(base)
        cfg["seed"] = summary.seed
        context = RunContext(cfg)
        spec = BaselineSpec.from_dict(cfg["baseline"])
        train_size = int(round(context.dataset_spec.size * context.train_config().fractions[0]))
        spec.sizes = [train_size]
        row = run_predictability_baseline(context.dataset_spec, context.test_spec, context.vocabulary,
                                          context.templates, spec, context.train_config(),
                                          context.seeds.init)[0]
        lifts[summary.seed] = recognition_lift(summary.test_accuracy, row.free_running_accuracy)
    return lifts


def run_ablation(base: Dict[str, Any], suite: AblationSuite, out_dir=None, jobs: int = 1,
                 with_lift: bool = True) -> AblationResult:
    """Train every (config, seed) pair, then reduce to the table and the direction checks."""
    tasks = []
    for name in suite.configs:
        for seed in suite.seeds:
            cfg = ablation_config(base, name, suite)
            cfg["seed"] = int(seed)
            run_dir = Path(out_dir) / f"{name}_seed{seed}" if out_dir is not None else None
            tasks.append((name, cfg, run_dir))
    Logger.info(f"Ablation suite: {len(tasks)} runs over configs {suite.configs} on {jobs} worker(s)")
    rows = run_many(tasks, jobs)
    lifts = reference_lifts(base, rows) if with_lift and REFERENCE in suite.configs else {}
    directions = evaluate_directions(rows)
    for d in directions:
        if d.compared:
            Logger.info(f"{d.name}: {d.votes}/{d.compared} -> {'pass' if d.passed else 'FAIL'}")

    if out_dir is not None:
        out_dir = ensure_dir(out_dir)
        table = [_row(r, lifts.get(r.seed) if r.name == REFERENCE else None) for r in rows]
        FileManager.save_csv(ABLATION_COLUMNS, table, out_dir / ABLATION_FILE)
        FileManager.save_csv(("check", "votes", "compared", "passed"),
                             [(d.name, d.votes, d.compared, d.passed) for d in directions],
                             out_dir / DIRECTIONS_FILE)
    failed = sum(r.status != "ok" for r in rows)
    if failed:
        Logger.warning(f"{failed} of {len(rows)} ablation run(s) failed; table is partial")
    return AblationResult(rows, directions, lifts)


__all__ = [
    "ABLATION_COLUMNS",
    "AblationResult",
    "AblationSuite",
    "DIRECTION_CHECKS",
    "DirectionCheck",
    "DirectionResult",
    "ablation_config",
    "config_diff",
    "evaluate_directions",
    "reference_lifts",
    "run_ablation",
]
