"""
Procedural handwriting-like glyphs.

Every drawable character is a small set of polyline skeletons in a unit box
(y grows downwards, cap height 0..1, descenders to 1.3). A ``GlyphStyle``
slants, scales, wobbles and jitters the skeleton before it is stroked with
OpenCV, so the same (token, style, variant) always gives the same pixels.
"""

from __future__ import annotations

import math
import zlib
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import cv2
import numpy as np

from scoresheet_reader.core.image_processor import ImageProcessor
from scoresheet_reader.core.notation import LangMap, translate_token
from scoresheet_reader.core.vocabulary import Vocabulary
from scoresheet_reader.errors import RenderError
from scoresheet_reader.utils import Logger

Point = Tuple[float, float]
Stroke = List[Point]


def _arc(cx: float, cy: float, rx: float, ry: float, a0: float, a1: float, n: int = 10) -> Stroke:
    return [
        (cx + rx * math.cos(math.radians(a)), cy + ry * math.sin(math.radians(a)))
        for a in np.linspace(a0, a1, n)
    ]


def _ellipse(cx: float, cy: float, rx: float, ry: float) -> Stroke:
    return _arc(cx, cy, rx, ry, 0, 360, 16)


# Stroke skeletons. Angles for arcs are in degrees, 90 = down.
STROKES: Dict[str, List[Stroke]] = {
    # lower case (x-height 0.4..1.0)
    "a": [_ellipse(0.3, 0.7, 0.25, 0.3), [(0.55, 0.4), (0.55, 1.0)]],
    "b": [[(0.05, 0.0), (0.05, 1.0)], _ellipse(0.3, 0.7, 0.25, 0.3)],
    "c": [_arc(0.32, 0.7, 0.27, 0.3, 45, 315, 12)],
    "d": [[(0.55, 0.0), (0.55, 1.0)], _ellipse(0.3, 0.7, 0.25, 0.3)],
    "e": [[(0.07, 0.7), (0.57, 0.7)] + _arc(0.32, 0.7, 0.25, 0.3, 0, -320, 12)],
    "f": [_arc(0.45, 0.2, 0.15, 0.18, -20, -180, 6) + [(0.3, 1.0)], [(0.1, 0.45), (0.5, 0.45)]],
    "g": [_ellipse(0.3, 0.65, 0.25, 0.25), [(0.55, 0.4), (0.55, 1.1)] + _arc(0.3, 1.1, 0.25, 0.2, 0, 160, 6)],
    "h": [[(0.05, 0.0), (0.05, 1.0)], [(0.05, 0.65)] + _arc(0.3, 0.65, 0.25, 0.22, 180, 360, 8) + [(0.55, 1.0)]],
    "x": [[(0.05, 0.4), (0.55, 1.0)], [(0.55, 0.4), (0.05, 1.0)]],
    # digits
    "0": [_ellipse(0.3, 0.5, 0.27, 0.5)],
    "1": [[(0.12, 0.22), (0.32, 0.0), (0.32, 1.0)]],
    "2": [_arc(0.3, 0.28, 0.25, 0.25, 200, 390, 8) + [(0.05, 1.0), (0.58, 1.0)]],
    "3": [_arc(0.3, 0.26, 0.24, 0.24, 200, 450, 9), _arc(0.3, 0.74, 0.27, 0.26, 270, 520, 9)],
    "4": [[(0.45, 1.0), (0.45, 0.0), (0.05, 0.65), (0.6, 0.65)]],
    "5": [[(0.55, 0.0), (0.12, 0.0), (0.08, 0.45)] + _arc(0.3, 0.7, 0.27, 0.28, 250, 510, 10)],
    "6": [_arc(0.35, 0.55, 0.28, 0.55, 290, 150, 8), _ellipse(0.32, 0.73, 0.25, 0.27)],
    "7": [[(0.05, 0.0), (0.58, 0.0), (0.2, 1.0)]],
    "8": [_ellipse(0.3, 0.25, 0.22, 0.24), _ellipse(0.3, 0.74, 0.26, 0.26)],
    "9": [_ellipse(0.3, 0.3, 0.25, 0.28), [(0.55, 0.3), (0.5, 1.0)]],
    # piece letters (English and Portuguese) and castling
    "K": [[(0.05, 0.0), (0.05, 1.0)], [(0.55, 0.0), (0.05, 0.55)], [(0.2, 0.42), (0.58, 1.0)]],
    "Q": [_ellipse(0.32, 0.5, 0.28, 0.5), [(0.38, 0.72), (0.62, 1.05)]],
    "R": [[(0.05, 1.0), (0.05, 0.0), (0.35, 0.0)] + _arc(0.35, 0.25, 0.2, 0.25, 270, 450, 7) + [(0.05, 0.5)],
          [(0.3, 0.5), (0.58, 1.0)]],
    "B": [[(0.05, 0.0), (0.05, 1.0)],
          [(0.05, 0.0), (0.3, 0.0)] + _arc(0.3, 0.24, 0.22, 0.24, 270, 450, 7) + [(0.05, 0.48)],
          [(0.05, 0.48), (0.32, 0.48)] + _arc(0.32, 0.74, 0.26, 0.26, 270, 450, 7) + [(0.05, 1.0)]],
    "N": [[(0.05, 1.0), (0.05, 0.0), (0.55, 1.0), (0.55, 0.0)]],
    "C": [_arc(0.33, 0.5, 0.28, 0.5, 40, 320, 12)],
    "D": [[(0.05, 0.0), (0.05, 1.0)], [(0.05, 0.0), (0.2, 0.0)] + _arc(0.2, 0.5, 0.38, 0.5, 270, 450, 10) + [(0.05, 1.0)]],
    "T": [[(0.0, 0.0), (0.6, 0.0)], [(0.3, 0.0), (0.3, 1.0)]],
    "O": [_ellipse(0.32, 0.5, 0.29, 0.5)],
    # suffixes and separators
    "-": [[(0.1, 0.6), (0.45, 0.6)]],
    "=": [[(0.08, 0.5), (0.5, 0.5)], [(0.08, 0.72), (0.5, 0.72)]],
    "+": [[(0.05, 0.6), (0.55, 0.6)], [(0.3, 0.35), (0.3, 0.85)]],
    "#": [[(0.15, 0.25), (0.1, 0.95)], [(0.45, 0.25), (0.4, 0.95)], [(0.0, 0.45), (0.6, 0.45)], [(0.0, 0.75), (0.6, 0.75)]],
}

ADVANCE: Dict[str, float] = {"-": 0.55, "1": 0.5, "=": 0.6, "x": 0.66}
DEFAULT_ADVANCE = 0.72
GLYPH_HEIGHT = 1.3  # unit-box height including descenders


@dataclass(frozen=True)
class GlyphStyle:
    """One simulated writer."""

    slant: float = 0.0
    stroke_width: int = 2
    baseline_wobble: float = 0.0
    scale: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.stroke_width < 1:
            raise RenderError(f"stroke_width must be >= 1, got {self.stroke_width}")
        if not 0.5 < self.scale <= 1.5:
            raise RenderError(f"scale must lie in (0.5, 1.5], got {self.scale}")


def make_style_pool(seeds: Sequence[int], stroke_range: Tuple[int, int] = (2, 4),
                    max_wobble: float = 2.0) -> List[GlyphStyle]:
    """Derive one writer style per seed."""
    pool = []
    for seed in seeds:
        rng = np.random.default_rng([int(seed), 0x57])
        pool.append(GlyphStyle(
            slant=float(rng.uniform(-0.2, 0.35)),
            stroke_width=int(rng.integers(stroke_range[0], stroke_range[1] + 1)),
            baseline_wobble=float(rng.uniform(0.0, max_wobble)),
            scale=float(rng.uniform(0.8, 1.15)),
            seed=int(seed),
        ))
    return pool


def render_glyph(token: str, style: GlyphStyle, cell_size: Tuple[int, int], variant: int = 0) -> np.ndarray:
    """Render *token* as dark ink on white, small enough to sit inside a cell.

    ``cell_size`` is ``(width, height)`` in pixels. The returned image is
    float32 in [0, 1] and never larger than the cell minus a stroke margin.
    """
    bad = [ch for ch in token if ch not in STROKES]
    if not token or bad:
        raise RenderError(f"cannot draw token {token!r} (undrawable: {''.join(bad) or 'empty'})")

    cell_w, cell_h = cell_size
    rng = np.random.default_rng([style.seed, zlib.crc32(token.encode("ascii")), variant])
    em = cell_h * 0.5 * style.scale
    shear = math.tan(style.slant)
    jitter = 0.02 * em

    strokes: List[np.ndarray] = []
    pen = 0.0
    for ch in token:
        dy = rng.normal(0.0, style.baseline_wobble) if style.baseline_wobble > 0 else 0.0
        for skeleton in STROKES[ch]:
            pts = np.asarray(skeleton, dtype=np.float64)
            xs = (pen + pts[:, 0]) * em + (1.0 - pts[:, 1]) * em * shear
            ys = pts[:, 1] * em + dy
            noise = rng.normal(0.0, jitter, size=(len(pts), 2))
            strokes.append(np.stack([xs, ys], axis=1) + noise)
        pen += ADVANCE.get(ch, DEFAULT_ADVANCE)

    margin = style.stroke_width + 1
    all_pts = np.concatenate(strokes)
    origin = all_pts.min(axis=0) - margin
    extent = all_pts.max(axis=0) - origin + margin
    width, height = int(math.ceil(extent[0])) + 1, int(math.ceil(extent[1])) + 1

    canvas = np.full((height, width), 255, dtype=np.uint8)
    shift = 4
    for stroke in strokes:
        fixed = np.rint((stroke - origin) * (1 << shift)).astype(np.int32)
        cv2.polylines(canvas, [fixed.reshape(-1, 1, 2)], False, 0,
                      thickness=style.stroke_width, lineType=cv2.LINE_AA, shift=shift)

    max_w = cell_w - 2 * margin
    max_h = cell_h - 2 * margin
    if max_w < 1 or max_h < 1:
        raise RenderError(f"cell {cell_size} too small for stroke width {style.stroke_width}")
    factor = min(1.0, max_w / width, max_h / height)
    if factor < 1.0:
        size = (max(1, int(width * factor)), max(1, int(height * factor)))
        canvas = cv2.resize(canvas, size, interpolation=cv2.INTER_AREA)
    return ImageProcessor.to_unit_range(canvas)


class GlyphBank:
    """The fixed set of individual move images reused across collages."""

    def __init__(self, glyphs: Dict[int, List[np.ndarray]]):
        self._glyphs = glyphs

    def __contains__(self, code: int) -> bool:
        return bool(self._glyphs.get(code))

    def instances(self, code: int) -> List[np.ndarray]:
        return self._glyphs.get(code, [])

    def pick(self, code: int, rng: np.random.Generator) -> Optional[np.ndarray]:
        choices = self._glyphs.get(code)
        if not choices:
            return None
        return choices[int(rng.integers(len(choices)))]

    @staticmethod
    def build(vocabulary: Vocabulary, style_pool: Sequence[GlyphStyle], glyphs_per_token: int,
              cell_size: Tuple[int, int], seed: int, lang_map: Optional[LangMap] = None) -> "GlyphBank":
        """Render ``glyphs_per_token`` instances of every move, each by a writer drawn from the pool.

        With *lang_map* (English -> sheet language) tokens are drawn the way
        they would be written on the sheet while codes stay English.
        """
        if not style_pool:
            raise RenderError("style pool is empty")
        rng = np.random.default_rng(seed)
        glyphs: Dict[int, List[np.ndarray]] = {}
        for code in vocabulary.move_codes:
            written = translate_token(vocabulary.token_of(code), lang_map)
            instances = []
            for variant in range(glyphs_per_token):
                style = style_pool[int(rng.integers(len(style_pool)))]
                instances.append(render_glyph(written, style, cell_size, variant))
            glyphs[code] = instances
        Logger.debug(f"Glyph bank: {len(glyphs)} tokens x {glyphs_per_token} instances")
        return GlyphBank(glyphs)


__all__ = ["GlyphStyle", "GlyphBank", "make_style_pool", "render_glyph", "STROKES"]
