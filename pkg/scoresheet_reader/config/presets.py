"""
Run presets for Scoresheet Reader.

``PAPER_PRESET`` is the full-size recipe (batch 16, lr 0.0005, dropout 0.2,
hidden 512, embedding 256, convergence at loss 0.25 / accuracy 0.9) on the
8-row 800x862 sheet crop. ``DESK_PRESET`` keeps the same recipe at a size that
trains in minutes on a laptop CPU.
"""

import copy
import dataclasses
from typing import Any, Dict, Type, TypeVar

import psutil

from scoresheet_reader.errors import ConfigError

T = TypeVar("T")

# Factors of the ablation suite, relative to the reference configuration.
ABLATION_FACTORS = {
    "a": {},
    "b": {"train.teacher_forcing": False},
    "c": {"dataset.size": "reduced"},
    "d": {"dataset.size": "reduced", "dataset.source": "uniform"},
    "e": {"dataset.half_resolution": True},
    "f": {"dataset.half_resolution": True, "train.teacher_forcing": False},
}

DESK_PRESET: Dict[str, Any] = {
    'preset': 'desk',
    'seed': 0,
    'jobs': 1,
    'corpus': {
        'pgn': 'openings.pgn',
        'positions': 8,
        'vocab_cap': 56,  # the shipped corpus has 50 moves in its first 8 plies
    },
    'dataset': {
        'size': 2000,
        'length': 0,
        'layout': 'desk',
        'rows': 0,
        'half_resolution': False,
        'source': 'template',
        'num_templates': 20,
        'mutation_prob': 0.2,
        'style_seed_start': 0,
        'style_count': 24,
        'glyphs_per_token': 4,
        'sheet_language': 'pt',
        'stroke_min': 1,
        'stroke_max': 2,
        'max_wobble': 1.0,
    },
    'model': {
        'backbone_channels': [8, 16, 32],
        'hidden_dim': 64,
        'attention_dim': 64,
        'embed_dim': 32,
        'bidirectional': False,
        'freeze_backbone': False,
        'max_decode_len': 0,  # 0 = sequence length + END
        'dtype': 'float32',
    },
    'train': {
        'batch_size': 16,
        'lr': 0.003,
        'beta1': 0.9,
        'beta2': 0.999,
        'eps': 1e-7,
        'dropout': 0.2,
        'teacher_forcing': True,
        'convergence_loss': 0.25,
        'convergence_acc': 0.9,
        'max_epochs': 50,
        'val_fraction': 0.2,
        'clip_norm': 5.0,
        'eval_test_every': 0,
        'stop_on_convergence': True,
    },
    'eval': {
        'test_size': 200,
        'test_style_seed_start': 1000,
        'test_source': 'template',
        'tolerance_px': 4.0,
        'attention_samples': 1,
    },
    'schedule': {
        'steps': [
            {'note': 'easy styles', 'epochs': 6,
             'dataset': {'style_count': 6, 'stroke_max': 1, 'max_wobble': 0.0}},
            {'note': 'more styles', 'epochs': 6,
             'dataset': {'style_count': 24}},
            {'note': 'hard styles only', 'epochs': 6,
             'dataset': {'style_seed_start': 500, 'style_count': 24, 'stroke_min': 2, 'max_wobble': 2.0}},
        ],
    },
    'suite': {
        'configs': 'abcdef',
        'seeds': [0, 1, 2],
        'reduced_fraction': 0.4,
    },
    'sweep': {
        'lengths': [4, 8, 12, 16],
        'sizes': [250, 500, 1000, 2000],
        'seeds': [0, 1, 2],
        'rows': 8,
        'vocab_cap': 0,  # 0 = keep every move of the first max(lengths) positions
    },
    'baseline': {
        'sizes': [500, 2000],
        'epochs': 30,
        'hidden_dim': 64,
        'embed_dim': 32,
    },
}

PAPER_PRESET: Dict[str, Any] = copy.deepcopy(DESK_PRESET)
PAPER_PRESET.update({
    'preset': 'paper',
    'corpus': {'pgn': 'openings.pgn', 'positions': 16, 'vocab_cap': 175},
})
PAPER_PRESET['dataset'].update({
    'size': 5000, 'layout': 'paper', 'stroke_min': 2, 'stroke_max': 4, 'max_wobble': 3.0,
})
PAPER_PRESET['model'].update({
    'backbone_channels': [16, 32, 64, 64], 'hidden_dim': 512, 'attention_dim': 512, 'embed_dim': 256,
})
PAPER_PRESET['train'].update({'lr': 0.0005, 'max_epochs': 200})
PAPER_PRESET['eval'].update({'test_size': 114, 'tolerance_px': 16.0})
PAPER_PRESET['schedule'] = {
    'steps': [
        {'note': 'refinement 1', 'epochs': 10, 'dataset': {'size': 10000}},
        {'note': 'refinement 2', 'epochs': 10, 'dataset': {'size': 70000}},
        {'note': 'refinement 3', 'epochs': 10, 'dataset': {'size': 10000}},
        {'note': 'refinement 4', 'epochs': 10, 'dataset': {'size': 2300, 'style_seed_start': 500}},
    ],
}
PAPER_PRESET['sweep'].update({'sizes': [1000, 2000, 5000, 10000], 'vocab_cap': 175})
PAPER_PRESET['baseline'].update({'sizes': [2000, 5000], 'hidden_dim': 512, 'embed_dim': 256})

PRESETS = {
    'desk': DESK_PRESET,
    'paper': PAPER_PRESET,
}


def get_preset(name: str) -> Dict[str, Any]:
    try:
        return copy.deepcopy(PRESETS[name])
    except KeyError as exc:
        raise ConfigError(f"unknown preset {name!r} (choose from {', '.join(PRESETS)})") from exc


def get_optimal_jobs(requested: int) -> int:
    """Clamp a requested worker count to the physical cores available."""
    cores = psutil.cpu_count(logical=False) or psutil.cpu_count() or 1
    return max(1, min(int(requested), cores))


def dataclass_from_dict(cls: Type[T], data: Dict[str, Any], section: str) -> T:
    """Build *cls* from *data*, rejecting keys the dataclass does not declare."""
    names = {f.name for f in dataclasses.fields(cls) if f.init}
    unknown = sorted(set(data) - names)
    if unknown:
        raise ConfigError(f"unknown key(s) in [{section}]: {', '.join(unknown)}")
    return cls(**data)
