"""
Attention-map and learning-curve export.

Heat maps are bilinear in grid coordinates and registered through the
receptive-field back-map, so a one-hot weight peaks at its cell's pixel
center. Raw weights are always written next to the overlays.
"""

from __future__ import annotations

from pathlib import Path
from typing import List, Sequence

import cv2
import numpy as np

from scoresheet_reader.errors import DataError
from scoresheet_reader.model.config import GridGeometry
from scoresheet_reader.utils import FileManager, Logger
from scoresheet_reader.utils.paths import ensure_dir

ATTENTION_CSV = "attention.csv"
CURVE_COLUMNS = ("epoch", "train_loss", "val_loss", "train_acc", "val_acc", "test_acc", "seconds")


def attention_heatmap(alpha: np.ndarray, geometry: GridGeometry, image_size) -> np.ndarray:
    """Upsample one step's weights (L,) to an (H, W) float map."""
    alpha = np.asarray(alpha, dtype=np.float32)
    if alpha.shape != (geometry.size,):
        raise DataError(f"weights of shape {alpha.shape} do not fit a {geometry.rows}x{geometry.cols} grid")
    width, height = image_size
    grid = alpha.reshape(geometry.rows, geometry.cols)
    # Pixel center x + 0.5 sits at grid column (x + 0.5 - offset_x) / scale.
    map_x = ((np.arange(width, dtype=np.float32) + 0.5 - geometry.offset_x) / geometry.scale)
    map_y = ((np.arange(height, dtype=np.float32) + 0.5 - geometry.offset_y) / geometry.scale)
    map_x = np.broadcast_to(map_x[None, :], (height, width)).astype(np.float32)
    map_y = np.broadcast_to(map_y[:, None], (height, width)).astype(np.float32)
    return cv2.remap(grid, map_x, map_y, interpolation=cv2.INTER_LINEAR, borderMode=cv2.BORDER_REPLICATE)


def overlay(image: np.ndarray, heat: np.ndarray) -> np.ndarray:
    """Darken the sheet where attention is strong."""
    peak = float(heat.max())
    norm = heat / peak if peak > 0 else np.zeros_like(heat)
    return np.clip(image * (1.0 - 0.7 * norm), 0.0, 1.0)


def export_attention_map(weights: np.ndarray, geometry: GridGeometry, image: np.ndarray, out_dir,
                         prefix: str = "step") -> List[np.ndarray]:
    """Write ``<prefix>_NN.pgm`` overlays plus ``attention.csv`` for one sample's (T, L) weights."""
    weights = np.asarray(weights)
    if weights.ndim != 2:
        raise DataError(f"expected (steps, cells) weights, got shape {weights.shape}")
    out_dir = ensure_dir(out_dir)
    height, width = image.shape
    heats = []
    rows = []
    for t, alpha in enumerate(weights):
        heat = attention_heatmap(alpha, geometry, (width, height))
        heats.append(heat)
        FileManager.save_pgm(overlay(image, heat), out_dir / f"{prefix}_{t:02d}.pgm")
        for index, w in enumerate(alpha):
            r, c = geometry.unflatten(index)
            rows.append((t, r, c, f"{float(w):.9g}"))
    FileManager.save_csv(("step", "grid_row", "grid_col", "weight"), rows, out_dir / ATTENTION_CSV)
    Logger.debug(f"Exported {len(heats)} attention maps to {out_dir}")
    return heats


def load_attention_csv(path, geometry: GridGeometry) -> np.ndarray:
    path = Path(path)
    if path.is_dir():
        path = path / ATTENTION_CSV
    rows = FileManager.load_csv(path)
    steps = 1 + max(int(r["step"]) for r in rows)
    weights = np.zeros((steps, geometry.size), dtype=np.float64)
    for r in rows:
        weights[int(r["step"]), geometry.flatten(int(r["grid_row"]), int(r["grid_col"]))] = float(r["weight"])
    return weights


def export_curves(history: Sequence, path) -> bool:
    """Write ``EpochStats`` rows as CSV; missing values are left blank."""

    def cell(value):
        return "" if value is None else f"{value:.9g}"

    rows = []
    for s in history:
        rows.append((s.epoch, cell(s.train_loss), cell(s.val_loss), cell(s.train_acc), cell(s.val_acc),
                     cell(s.test_acc), f"{s.wall_time:.3f}"))
    return FileManager.save_csv(CURVE_COLUMNS, rows, path)


__all__ = ["attention_heatmap", "export_attention_map", "export_curves", "load_attention_csv", "overlay",
           "CURVE_COLUMNS"]
