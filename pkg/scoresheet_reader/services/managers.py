"""
Run-config and curve-history managers for Scoresheet Reader
"""

import copy
import json
import os
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Optional

from scoresheet_reader.config.presets import get_preset
from scoresheet_reader.errors import ConfigError
from scoresheet_reader.evaluation.export import export_curves
from scoresheet_reader.utils import FileManager, Logger
from scoresheet_reader.utils.paths import ensure_dir

# Constants
RESOLVED_CONFIG_FILE = 'resolved_config.json'
CURVES_FILE = 'curves.csv'
RUN_HEADER_FILE = 'run_header.txt'
ENV_PREFIX = 'READER_'


def _parse_scalar(text: str) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _coerce(current: Any, value: Any, key: str) -> Any:
    """Convert *value* to the type of the default it replaces."""
    if isinstance(value, str) and not isinstance(current, str):
        value = _parse_scalar(value)
    try:
        if current is None:
            return value
        if isinstance(current, bool):
            if isinstance(value, bool):
                return value
            if value in (0, 1):
                return bool(value)
            raise ValueError(value)
        if isinstance(current, int):
            if isinstance(value, bool) or float(value) != int(float(value)):
                raise ValueError(value)
            return int(float(value))
        if isinstance(current, float):
            if isinstance(value, bool):
                raise ValueError(value)
            return float(value)
        if isinstance(current, str):
            return str(value)
        if isinstance(current, list):
            if not isinstance(value, list):
                raise ValueError(value)
            return value
    except (TypeError, ValueError):
        raise ConfigError(f"{key}: cannot use {value!r} where a {type(current).__name__} is expected") from None
    return value


class RunConfigManager:
    """Resolved run configuration: preset, then file, then environment, then flags."""

    def __init__(self, preset: str = 'desk'):
        self.settings = get_preset(preset)

    @staticmethod
    def resolve(preset: Optional[str] = None, config_path=None, environ: Optional[Mapping[str, str]] = None,
                overrides: Iterable[str] = (), seed: Optional[int] = None,
                jobs: Optional[int] = None) -> 'RunConfigManager':
        loaded = RunConfigManager.read_file(config_path) if config_path else {}
        manager = RunConfigManager(preset or loaded.get('preset') or 'desk')
        if loaded:
            loaded = dict(loaded)
            loaded.pop('preset', None)
            manager.merge(loaded, origin=str(config_path))
        manager.apply_environment(os.environ if environ is None else environ)
        for item in overrides:
            key, sep, value = item.partition('=')
            if not sep:
                raise ConfigError(f"override {item!r} is not of the form section.key=value")
            manager.set(key.strip(), value.strip())
        if seed is not None:
            manager.set('seed', seed)
        if jobs is not None:
            manager.set('jobs', jobs)
        return manager

    @staticmethod
    def read_file(path) -> Dict[str, Any]:
        if not Path(path).exists():
            raise ConfigError(f"config file not found: {path}")
        loaded = FileManager.load_json(path)
        if not isinstance(loaded, dict) or not loaded:
            raise ConfigError(f"config file {path} holds no settings")
        return loaded

    def merge(self, data: Mapping[str, Any], origin: str = 'config', _target=None, _prefix: str = ''):
        target = self.settings if _target is None else _target
        for key, value in data.items():
            dotted = f"{_prefix}{key}"
            if key not in target:
                raise ConfigError(f"unknown config key {dotted!r} in {origin}")
            if isinstance(target[key], dict):
                if not isinstance(value, Mapping):
                    raise ConfigError(f"{dotted} must be a section, got {value!r}")
                self.merge(value, origin, target[key], dotted + '.')
            else:
                target[key] = _coerce(target[key], value, dotted)

    def apply_environment(self, environ: Mapping[str, str]):
        """``READER_TRAIN__LR=0.001`` overrides ``train.lr``; ``READER_SEED=3`` overrides ``seed``."""
        for name, value in sorted(environ.items()):
            if not name.startswith(ENV_PREFIX):
                continue
            dotted = name[len(ENV_PREFIX):].lower().replace('__', '.')
            self.set(dotted, value)
            Logger.debug(f"Environment override {dotted}={value}")

    def get(self, dotted: str, default=None):
        node: Any = self.settings
        for part in dotted.split('.'):
            if not isinstance(node, dict) or part not in node:
                return default
            node = node[part]
        return node

    def set(self, dotted: str, value: Any):
        parts = dotted.split('.')
        node = self.settings
        for part in parts[:-1]:
            if not isinstance(node.get(part), dict):
                raise ConfigError(f"unknown config key {dotted!r}")
            node = node[part]
        leaf = parts[-1]
        if leaf not in node or isinstance(node[leaf], dict):
            raise ConfigError(f"unknown config key {dotted!r}")
        node[leaf] = _coerce(node[leaf], value, dotted)
        Logger.debug(f"Setting {dotted} updated to {node[leaf]}")

    def get_all_settings(self) -> Dict[str, Any]:
        return copy.deepcopy(self.settings)

    def save_resolved(self, out_dir) -> Path:
        path = ensure_dir(out_dir) / RESOLVED_CONFIG_FILE
        if FileManager.save_json(self.settings, path):
            Logger.info(f"Resolved config written to {path}")
        return path


class CurveHistory:
    """Per-epoch training statistics, mirrored to ``curves.csv`` when given a run directory."""

    def __init__(self, out_dir=None):
        self.entries: List[Any] = []
        self.out_dir = ensure_dir(out_dir) if out_dir is not None else None

    def add_entry(self, stats):
        self.entries.append(stats)
        if self.out_dir is not None:
            export_curves(self.entries, self.out_dir / CURVES_FILE)
        Logger.debug(f"Recorded epoch {stats.epoch}")

    def write_header(self, config: Mapping[str, Any], seeds: Mapping[str, int], dataset_hash: str,
                     deterministic: bool = True) -> Optional[Path]:
        if self.out_dir is None:
            return None
        path = self.out_dir / RUN_HEADER_FILE
        lines = [
            f"# started {datetime.now().isoformat(timespec='seconds')}",
            f"# deterministic {str(deterministic).lower()}",
            f"# dataset_spec_sha256 {dataset_hash}",
        ]
        lines += [f"# seed.{name} {value}" for name, value in sorted(seeds.items())]
        lines.append(json.dumps(config, indent=2, sort_keys=True))
        try:
            path.write_text("\n".join(lines) + "\n", encoding='utf-8')
        except OSError as e:
            Logger.error(f"Failed to write {path}: {e}")
            return None
        return path

    def max_gap(self) -> float:
        """Largest (val_loss - train_loss) over the recorded epochs."""
        return max((s.val_loss - s.train_loss for s in self.entries if s.val_loss is not None), default=0.0)

    def get_stats(self) -> Dict[str, Any]:
        if not self.entries:
            return {'epochs': 0, 'best_val_loss': None, 'max_gap': None, 'final_train_acc': None}
        return {
            'epochs': len(self.entries),
            'best_val_loss': min((s.val_loss for s in self.entries if s.val_loss is not None), default=None),
            'max_gap': self.max_gap(),
            'final_train_acc': self.entries[-1].train_acc,
        }


__all__ = ["CurveHistory", "RunConfigManager", "RESOLVED_CONFIG_FILE", "CURVES_FILE", "RUN_HEADER_FILE"]
