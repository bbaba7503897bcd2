"""
File manager utility for Scoresheet Reader
"""

import csv
import json
import os
from pathlib import Path
from typing import Any, Dict, Iterable, List, Sequence

import numpy as np
from PIL import Image

from .logger import Logger


class FileManager:
    """File management utilities for JSON, JSON-lines, CSV and PGM files"""

    @staticmethod
    def save_json(data: dict, filename) -> bool:
        """Save dictionary to JSON file"""
        try:
            with open(filename, 'w', encoding='utf-8') as f:
                json.dump(data, f, indent=2, ensure_ascii=False, sort_keys=True)
            return True
        except Exception as e:
            Logger.error(f"Failed to save {filename}: {e}")
            return False

    @staticmethod
    def load_json(filename) -> dict:
        """Load dictionary from JSON file"""
        try:
            if os.path.exists(filename):
                with open(filename, 'r', encoding='utf-8') as f:
                    return json.load(f)
        except Exception as e:
            Logger.error(f"Failed to load {filename}: {e}")
        return {}

    @staticmethod
    def save_jsonl(rows: Iterable[Dict[str, Any]], filename):
        """Write one compact JSON object per line."""
        with open(filename, 'w', encoding='utf-8') as f:
            for row in rows:
                f.write(json.dumps(row, ensure_ascii=False, sort_keys=True))
                f.write('\n')

    @staticmethod
    def load_jsonl(filename) -> List[Dict[str, Any]]:
        with open(filename, 'r', encoding='utf-8') as f:
            return [json.loads(line) for line in f if line.strip()]

    @staticmethod
    def save_csv(header: Sequence[str], rows: Iterable[Sequence[Any]], filename) -> bool:
        try:
            with open(filename, 'w', encoding='utf-8', newline='') as f:
                writer = csv.writer(f)
                writer.writerow(header)
                for row in rows:
                    writer.writerow(row)
            return True
        except Exception as e:
            Logger.error(f"Failed to save {filename}: {e}")
            return False

    @staticmethod
    def load_csv(filename) -> List[Dict[str, str]]:
        with open(filename, 'r', encoding='utf-8', newline='') as f:
            return list(csv.DictReader(f))

    @staticmethod
    def save_pgm(pixels: np.ndarray, filename):
        """Write a grayscale image as binary PGM (P5).

        Float images are taken to be in [0, 1] (0 = black ink).
        """
        if pixels.dtype != np.uint8:
            pixels = np.clip(np.rint(pixels * 255.0), 0, 255).astype(np.uint8)
        Image.fromarray(pixels).save(Path(filename), format='PPM')

    @staticmethod
    def load_pgm(filename) -> np.ndarray:
        """Read a PGM file back into a float32 array in [0, 1]."""
        with Image.open(filename) as img:
            pixels = np.asarray(img.convert('L'), dtype=np.uint8)
        return pixels.astype(np.float32) / 255.0
