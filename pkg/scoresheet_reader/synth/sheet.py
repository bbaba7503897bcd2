"""
Scoresheet layout and collage composition.

A sheet has a header band, a printed row-number column and two move columns
(white, black). Moves are read left column then right column within a row,
rows top to bottom.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import List, Sequence, Tuple

import cv2
import numpy as np

from scoresheet_reader.core.image_processor import ImageProcessor
from scoresheet_reader.core.vocabulary import PAD_CODE
from scoresheet_reader.errors import CompositionError, ConfigError
from scoresheet_reader.synth.glyphs import GlyphBank

Box = Tuple[int, int, int, int]  # x, y, w, h

# Named layouts. "paper" is the 8-row 800x862 crop; "desk" is the small default.
LAYOUT_PRESETS = {
    "paper": dict(rows=8, image_size=(800, 862), header_height=62, number_width=80, line_thickness=2),
    "desk": dict(rows=4, image_size=(160, 88), header_height=8, number_width=16, line_thickness=1),
}


@dataclass(frozen=True)
class SheetLayout:
    rows: int
    image_size: Tuple[int, int]  # (width, height)
    header_height: int
    number_width: int
    line_thickness: int = 1

    def __post_init__(self):
        width, height = self.image_size
        if self.rows < 1:
            raise ConfigError("layout needs at least one row")
        if (height - self.header_height) % self.rows:
            raise ConfigError(f"height {height} minus header {self.header_height} is not divisible by {self.rows} rows")
        if (width - self.number_width) % 2:
            raise ConfigError(f"width {width} minus number column {self.number_width} must split into two columns")
        if self.row_height <= 4 * self.line_thickness or self.column_width <= 4 * self.line_thickness:
            raise ConfigError("cells too small for the grid line thickness")

    @staticmethod
    def preset(name: str, rows: int = None) -> "SheetLayout":
        """Build a named layout; *rows* overrides the preset when it keeps the row height."""
        try:
            params = dict(LAYOUT_PRESETS[name])
        except KeyError as exc:
            raise ConfigError(f"unknown layout preset {name!r}") from exc
        if rows is not None and rows != params["rows"]:
            row_h = (params["image_size"][1] - params["header_height"]) // params["rows"]
            params["image_size"] = (params["image_size"][0], params["header_height"] + rows * row_h)
            params["rows"] = rows
        return SheetLayout(**params)

    @property
    def row_height(self) -> int:
        return (self.image_size[1] - self.header_height) // self.rows

    @property
    def column_width(self) -> int:
        return (self.image_size[0] - self.number_width) // 2

    @property
    def sequence_length(self) -> int:
        return 2 * self.rows

    @property
    def cell_size(self) -> Tuple[int, int]:
        t = self.line_thickness
        return self.column_width - 2 * t, self.row_height - 2 * t

    @property
    def cell_boxes(self) -> List[Box]:
        """Cell interiors in reading order."""
        t = self.line_thickness
        cw, ch = self.cell_size
        boxes = []
        for r in range(self.rows):
            y = self.header_height + r * self.row_height + t
            for c in range(2):
                x = self.number_width + c * self.column_width + t
                boxes.append((x, y, cw, ch))
        return boxes


@lru_cache(maxsize=8)
def _blank_sheet(layout: SheetLayout) -> np.ndarray:
    width, height = layout.image_size
    t = layout.line_thickness
    sheet = np.full((height, width), 255, dtype=np.uint8)

    xs = [0, layout.number_width, layout.number_width + layout.column_width, width - t]
    ys = [layout.header_height + r * layout.row_height for r in range(layout.rows)] + [height - t]
    for x in xs:
        cv2.rectangle(sheet, (x, layout.header_height), (x + t - 1, height - 1), 0, thickness=-1)
    for y in [0] + ys:
        cv2.rectangle(sheet, (0, y), (width - 1, y + t - 1), 0, thickness=-1)

    # Printed row numbers, centered in the number column.
    font = cv2.FONT_HERSHEY_SIMPLEX
    inner_w = layout.number_width - 2 * t - 2
    inner_h = layout.row_height - 2 * t - 2
    for r in range(layout.rows):
        label = str(r + 1)
        (tw, th), base = cv2.getTextSize(label, font, 1.0, 1)
        scale = min(inner_w / tw, inner_h / (th + base)) * 0.8
        thickness = max(1, int(round(scale * 1.5)))
        (tw, th), base = cv2.getTextSize(label, font, scale, thickness)
        x = (layout.number_width - tw) // 2
        y = layout.header_height + r * layout.row_height + (layout.row_height + th) // 2
        cv2.putText(sheet, label, (x, y), font, scale, 0, thickness, cv2.LINE_AA)
    return sheet


def blank_sheet(layout: SheetLayout) -> np.ndarray:
    """Grid lines and row numbers only, float32 in [0, 1]."""
    return ImageProcessor.to_unit_range(_blank_sheet(layout))


def compose_sheet(codes: Sequence[int], layout: SheetLayout, bank: GlyphBank,
                  seed: int) -> Tuple[np.ndarray, List[Box]]:
    """Collage one glyph per move code into the sheet cells.

    ``codes`` may be shorter than ``2 * layout.rows``; the remaining cells stay
    blank, as do cells holding PAD. Returns the image and one ink bounding box
    per code (the cell interior for blank cells).
    """
    if len(codes) > layout.sequence_length:
        raise CompositionError(f"{len(codes)} codes do not fit {layout.rows} rows")
    rng = np.random.default_rng(seed)
    image = blank_sheet(layout)
    pad = layout.line_thickness + 1
    boxes: List[Box] = []
    for code, (cx, cy, cw, ch) in zip(codes, layout.cell_boxes):
        code = int(code)
        if code == PAD_CODE:
            boxes.append((cx, cy, cw, ch))
            continue
        glyph = bank.pick(code, rng)
        if glyph is None:
            raise CompositionError(f"no glyph for code {code}")
        ink = ImageProcessor.ink_bbox(glyph)
        if ink is None:
            raise CompositionError(f"glyph for code {code} has no ink")
        gx, gy, gw, gh = ink
        free_x, free_y = cw - gw - 2 * pad, ch - gh - 2 * pad
        if free_x < 0 or free_y < 0:
            raise CompositionError(f"glyph {gw}x{gh} for code {code} does not fit cell {cw}x{ch}")
        x = cx + pad + int(rng.integers(0, free_x + 1))
        y = cy + pad + int(rng.integers(0, free_y + 1))
        crop = glyph[gy:gy + gh, gx:gx + gw]
        region = image[y:y + gh, x:x + gw]
        np.minimum(region, crop, out=region)
        if not (cx <= x and cy <= y and x + gw <= cx + cw and y + gh <= cy + ch):
            raise CompositionError(f"ink of code {code} escapes its cell")
        boxes.append((x, y, gw, gh))
    return ImageProcessor.quantize(image), boxes


__all__ = ["SheetLayout", "LAYOUT_PRESETS", "blank_sheet", "compose_sheet"]
