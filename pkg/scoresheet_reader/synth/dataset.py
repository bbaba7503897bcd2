"""
Synthetic dataset generation.

``generate_dataset`` is a pure function of its ``DatasetSpec`` (plus the
vocabulary and templates it is given): per-sample seeds are split off the
master seed with ``numpy.random.SeedSequence`` so samples can be produced on
any number of workers with identical results.
"""

from __future__ import annotations

import hashlib
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from scoresheet_reader.config.presets import dataclass_from_dict
from scoresheet_reader.core.image_processor import ImageProcessor
from scoresheet_reader.core.notation import GameRecord, LangMap
from scoresheet_reader.core.vocabulary import UNK_CODE, Vocabulary
from scoresheet_reader.errors import ConfigError, DataError
from scoresheet_reader.synth.glyphs import GlyphBank, make_style_pool
from scoresheet_reader.synth.sequences import TEMPLATE, UNIFORM, SequenceSource, sample_with_origin
from scoresheet_reader.synth.sheet import SheetLayout, compose_sheet
from scoresheet_reader.utils import FileManager, Logger
from scoresheet_reader.utils.paths import ensure_dir

MANIFEST_FILE = "manifest.jsonl"

# SeedSequence stream tags, so the glyph bank and the samples never share draws.
_SAMPLE_STREAM = 1
_BANK_STREAM = 2


def derive_seed(master: int, stream: int, index: int = 0) -> int:
    state = np.random.SeedSequence([int(master), stream, int(index)]).generate_state(2, dtype=np.uint32)
    return (int(state[0]) << 31) ^ int(state[1])


@dataclass
class DatasetSpec:
    size: int = 2000
    length: int = 0  # moves per sample; 0 = every cell of the layout
    layout: str = "desk"
    rows: int = 0  # 0 = preset row count
    half_resolution: bool = False
    source: str = TEMPLATE
    num_templates: int = 20
    mutation_prob: float = 0.2
    style_seed_start: int = 0
    style_count: int = 24
    glyphs_per_token: int = 4
    sheet_language: str = "pt"
    stroke_min: int = 1
    stroke_max: int = 2
    max_wobble: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.size < 1:
            raise ConfigError(f"dataset size must be >= 1, got {self.size}")
        if self.source not in (TEMPLATE, UNIFORM):
            raise ConfigError(f"unknown dataset source {self.source!r}")
        if self.style_count < 1 or self.glyphs_per_token < 1:
            raise ConfigError("style_count and glyphs_per_token must be >= 1")
        if self.sheet_language not in ("pt", "en"):
            raise ConfigError(f"unsupported sheet language {self.sheet_language!r}")
        if self.stroke_min < 1 or self.stroke_max < self.stroke_min:
            raise ConfigError("invalid stroke width range")

    @staticmethod
    def from_dict(data: Dict[str, Any]) -> "DatasetSpec":
        return dataclass_from_dict(DatasetSpec, data, "dataset")

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    def content_hash(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode("utf-8")).hexdigest()

    def build_layout(self) -> SheetLayout:
        return SheetLayout.preset(self.layout, self.rows or None)

    @property
    def sequence_length(self) -> int:
        return self.length or self.build_layout().sequence_length

    @property
    def style_seeds(self) -> range:
        return range(self.style_seed_start, self.style_seed_start + self.style_count)

    def build_source(self, vocabulary: Vocabulary, templates: Sequence[Sequence[int]]) -> SequenceSource:
        if self.source == UNIFORM:
            return SequenceSource.uniform(len(vocabulary))
        chosen = list(templates)[: self.num_templates]
        return SequenceSource.from_templates(chosen, len(vocabulary), self.mutation_prob)


@dataclass
class SampleManifest:
    image_path: Optional[str]
    codes: List[int]
    bboxes: List[List[float]]
    source: str
    seed: int
    pixels: Optional[np.ndarray] = field(default=None, repr=False, compare=False)

    def to_dict(self) -> Dict[str, Any]:
        return {"image": self.image_path, "codes": list(self.codes), "bboxes": [list(b) for b in self.bboxes],
                "source": self.source, "seed": self.seed}

    @staticmethod
    def from_dict(row: Dict[str, Any]) -> "SampleManifest":
        try:
            return SampleManifest(row["image"], [int(c) for c in row["codes"]],
                                  [[float(v) for v in b] for b in row["bboxes"]], row["source"], int(row["seed"]))
        except KeyError as exc:
            raise DataError(f"manifest row missing field {exc}") from exc

    def load_pixels(self, root: Optional[Path] = None) -> np.ndarray:
        if self.pixels is None:
            if self.image_path is None:
                raise DataError(f"sample {self.seed} has neither pixels nor an image path")
            path = Path(self.image_path)
            if root is not None and not path.is_absolute():
                path = root / path
            self.pixels = FileManager.load_pgm(path)
        return self.pixels


def build_templates(corpus: Sequence[GameRecord], vocabulary: Vocabulary, length: int) -> List[List[int]]:
    """Encode the first *length* moves of every game that is long enough and fully in-vocabulary."""
    templates = []
    for game in corpus:
        if len(game.moves) < length:
            continue
        codes = vocabulary.encode(game.tokens[:length], append_end=False)
        if UNK_CODE not in codes:
            templates.append(codes)
    if not templates:
        raise ConfigError(f"no corpus game yields an in-vocabulary template of length {length}")
    return templates


def _sample_seeds(spec: DatasetSpec, index: int):
    sample_seed = derive_seed(spec.seed, _SAMPLE_STREAM, index)
    seq_seed, compose_seed = np.random.SeedSequence(sample_seed).generate_state(2)
    return sample_seed, int(seq_seed), int(compose_seed)


def sample_codes(spec: DatasetSpec, vocabulary: Vocabulary, templates: Sequence[Sequence[int]] = ()) -> List[List[int]]:
    """The target sequences ``generate_dataset`` would draw for *spec*, without rendering anything."""
    source = spec.build_source(vocabulary, templates)
    length = spec.sequence_length
    return [sample_with_origin(source, length, _sample_seeds(spec, i)[1])[0] for i in range(spec.size)]


def generate_dataset(spec: DatasetSpec, vocabulary: Vocabulary, templates: Sequence[Sequence[int]] = (),
                     out_dir=None, jobs: int = 1) -> List[SampleManifest]:
    """Render ``spec.size`` labeled sheets; optionally write PGMs + ``manifest.jsonl`` to *out_dir*."""
    layout = spec.build_layout()
    length = spec.sequence_length
    if length > layout.sequence_length:
        raise ConfigError(f"length {length} exceeds the {layout.sequence_length} cells of the layout")
    source = spec.build_source(vocabulary, templates)
    lang_map = LangMap.default().inverted() if spec.sheet_language == "pt" else None
    pool = make_style_pool(spec.style_seeds, (spec.stroke_min, spec.stroke_max), spec.max_wobble)
    bank = GlyphBank.build(vocabulary, pool, spec.glyphs_per_token, layout.cell_size,
                           derive_seed(spec.seed, _BANK_STREAM), lang_map)

    image_dir = ensure_dir(Path(out_dir) / "images") if out_dir is not None else None

    def render(index: int) -> SampleManifest:
        sample_seed, seq_seed, compose_seed = _sample_seeds(spec, index)
        codes, origin = sample_with_origin(source, length, seq_seed)
        image, boxes = compose_sheet(codes, layout, bank, int(compose_seed))
        bboxes = [[float(v) for v in box] for box in boxes]
        if spec.half_resolution:
            image = ImageProcessor.quantize(ImageProcessor.downsample_half(image))
            bboxes = [[v * 0.5 for v in box] for box in bboxes]
        image_path = None
        if image_dir is not None:
            image_path = f"images/sample_{index:06d}.pgm"
            FileManager.save_pgm(image, image_dir / f"sample_{index:06d}.pgm")
        return SampleManifest(image_path, codes, bboxes, origin, sample_seed, pixels=image)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool_exec:
            manifests = list(pool_exec.map(render, range(spec.size)))
    else:
        manifests = [render(i) for i in range(spec.size)]

    if out_dir is not None:
        FileManager.save_jsonl((m.to_dict() for m in manifests), Path(out_dir) / MANIFEST_FILE)
    Logger.info(f"Generated {len(manifests)} samples ({spec.source}, length {length}, "
                f"{'half' if spec.half_resolution else 'full'} resolution)")
    return manifests


def load_manifests(path) -> List[SampleManifest]:
    """Read a ``manifest.jsonl`` (or the directory holding it) and its images."""
    path = Path(path)
    if path.is_dir():
        path = path / MANIFEST_FILE
    if not path.exists():
        raise DataError(f"manifest not found: {path}")
    manifests = [SampleManifest.from_dict(row) for row in FileManager.load_jsonl(path)]
    for m in manifests:
        m.load_pixels(path.parent)
    return manifests


__all__ = [
    "DatasetSpec",
    "SampleManifest",
    "build_templates",
    "derive_seed",
    "generate_dataset",
    "load_manifests",
    "sample_codes",
]
