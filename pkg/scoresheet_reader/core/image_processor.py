"""
Image helpers for Scoresheet Reader.

Pixel convention throughout the package: grayscale float32 in [0, 1] where
0 is black ink and 1 is white paper.
"""

from typing import Tuple

import cv2
import numpy as np

from scoresheet_reader.errors import DataError


class ImageProcessor:
    """Basic pixel utilities shared by data synthesis, training and export."""

    @staticmethod
    def quantize(image: np.ndarray) -> np.ndarray:
        """Snap *image* to the 8-bit levels a PGM file can hold.

        In-memory samples and samples reloaded from disk are then identical.
        """
        return ImageProcessor.to_unit_range(ImageProcessor.to_uint8(image))

    @staticmethod
    def to_unit_range(image: np.ndarray) -> np.ndarray:
        if image.dtype == np.uint8:
            return image.astype(np.float32) / 255.0
        return image.astype(np.float32)

    @staticmethod
    def to_uint8(image: np.ndarray) -> np.ndarray:
        return np.clip(np.rint(image * 255.0), 0, 255).astype(np.uint8)

    @staticmethod
    def downsample_half(image: np.ndarray) -> np.ndarray:
        """Integer 2x2 box-filter downsample (both dimensions must be even)."""
        h, w = image.shape[:2]
        if h % 2 or w % 2:
            raise DataError(f"cannot halve an image of size {w}x{h}")
        blocks = image.astype(np.float32).reshape(h // 2, 2, w // 2, 2)
        return blocks.mean(axis=(1, 3))

    @staticmethod
    def resize_to(image: np.ndarray, size: Tuple[int, int]) -> np.ndarray:
        """Area-resample a scan to ``size = (width, height)``, keeping 8-bit levels."""
        if image.shape[1::-1] == tuple(size):
            return ImageProcessor.to_unit_range(image)
        resized = cv2.resize(ImageProcessor.to_unit_range(image), tuple(size), interpolation=cv2.INTER_AREA)
        return ImageProcessor.quantize(resized)

    @staticmethod
    def ink_bbox(image: np.ndarray, threshold: float = 1.0):
        """Tight ``(x, y, w, h)`` box around pixels darker than *threshold*, or None."""
        ys, xs = np.nonzero(image < threshold)
        if xs.size == 0:
            return None
        x0, y0 = int(xs.min()), int(ys.min())
        return x0, y0, int(xs.max()) - x0 + 1, int(ys.max()) - y0 + 1


__all__ = ["ImageProcessor"]
