"""
Model configuration and feature-grid geometry.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Tuple

import numpy as np

from scoresheet_reader.config.presets import dataclass_from_dict
from scoresheet_reader.errors import ConfigError

DTYPES = {"float32": np.float32, "float64": np.float64}


@dataclass
class ModelConfig:
    image_size: Tuple[int, int]  # (width, height)
    vocab_size: int
    backbone_channels: List[int] = field(default_factory=lambda: [16, 32, 64, 64])
    hidden_dim: int = 512
    attention_dim: int = 512
    embed_dim: int = 256
    max_decode_len: int = 17
    dropout_rate: float = 0.2
    bidirectional: bool = False
    freeze_backbone: bool = False
    dtype: str = "float32"
    init_seed: int = 0

    def __post_init__(self):
        self.image_size = (int(self.image_size[0]), int(self.image_size[1]))
        self.backbone_channels = [int(c) for c in self.backbone_channels]
        for name in ("hidden_dim", "attention_dim", "embed_dim", "vocab_size", "max_decode_len"):
            if getattr(self, name) < 1:
                raise ConfigError(f"model.{name} must be >= 1, got {getattr(self, name)}")
        if not self.backbone_channels or min(self.backbone_channels) < 1:
            raise ConfigError("model.backbone_channels needs at least one positive channel count")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ConfigError(f"model.dropout_rate must lie in [0, 1), got {self.dropout_rate}")
        if self.dtype not in DTYPES:
            raise ConfigError(f"model.dtype must be one of {sorted(DTYPES)}")
        rows, cols = self.grid.rows, self.grid.cols
        if rows < 1 or cols < 1:
            raise ConfigError(f"image {self.image_size} is too small for {len(self.backbone_channels)} conv blocks")

    @property
    def numpy_dtype(self):
        return DTYPES[self.dtype]

    @property
    def stride(self) -> int:
        return 2 ** len(self.backbone_channels)

    @property
    def grid(self) -> "GridGeometry":
        return GridGeometry.for_backbone(self.image_size, len(self.backbone_channels))

    @property
    def encoder_dim(self) -> int:
        return 2 * self.hidden_dim if self.bidirectional else self.hidden_dim

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["image_size"] = list(self.image_size)
        return data

    @staticmethod
    def from_dict(data: Dict[str, Any]) -> "ModelConfig":
        return dataclass_from_dict(ModelConfig, data, "model")


@dataclass(frozen=True)
class GridGeometry:
    """Feature-grid shape plus the affine back-map from grid cells to pixel centers.

    A grid cell (row, col) summarizes the receptive field centered at pixel
    ``(scale * col + offset_x, scale * row + offset_y)`` in continuous image
    coordinates (pixel ``i`` spans ``[i, i + 1)``).
    """

    rows: int
    cols: int
    scale: float
    offset_x: float
    offset_y: float

    @staticmethod
    def for_backbone(image_size: Tuple[int, int], blocks: int) -> "GridGeometry":
        """Geometry of ``blocks`` x (3x3 valid conv, 2x2 max pool)."""
        width, height = image_size
        scale, offset = 1.0, 0.5
        for _ in range(blocks):
            width, height = width - 2, height - 2
            offset += scale
            width, height = width // 2, height // 2
            offset += 0.5 * scale
            scale *= 2
        return GridGeometry(max(height, 0), max(width, 0), scale, offset, offset)

    @property
    def size(self) -> int:
        return self.rows * self.cols

    def flatten(self, row: int, col: int) -> int:
        return row * self.cols + col

    def unflatten(self, index: int) -> Tuple[int, int]:
        if not 0 <= index < self.size:
            raise IndexError(f"grid index {index} outside [0, {self.size})")
        return divmod(index, self.cols)

    def pixel_center(self, index: int) -> Tuple[float, float]:
        row, col = self.unflatten(index)
        return self.scale * col + self.offset_x, self.scale * row + self.offset_y

    def centers(self) -> np.ndarray:
        """(L, 2) array of (x, y) centers in flattening order."""
        rows, cols = np.divmod(np.arange(self.size), self.cols)
        return np.stack([self.scale * cols + self.offset_x, self.scale * rows + self.offset_y], axis=1)

    def columns_between(self, x0: float, x1: float) -> int:
        """Feature columns whose centers fall in ``[x0, x1)``."""
        xs = self.scale * np.arange(self.cols) + self.offset_x
        return int(np.count_nonzero((xs >= x0) & (xs < x1)))


__all__ = ["DTYPES", "GridGeometry", "ModelConfig"]
