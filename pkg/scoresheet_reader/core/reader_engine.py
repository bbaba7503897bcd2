"""
Inference engine for Scoresheet Reader.

Wraps a trained checkpoint and its vocabulary behind one ``read`` call.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import List, Union

import numpy as np

from scoresheet_reader.core.image_processor import ImageProcessor
from scoresheet_reader.core.vocabulary import Vocabulary
from scoresheet_reader.errors import IncompatibleCheckpointError
from scoresheet_reader.model.checkpoint import load_checkpoint
from scoresheet_reader.model.network import AttentionRecord, ScoresheetModel
from scoresheet_reader.utils import FileManager, Logger


@dataclass
class ReadResult:
    tokens: List[str]
    codes: List[int]
    attention: AttentionRecord  # batch of one

    @property
    def text(self) -> str:
        return " ".join(self.tokens)


class ScoresheetReader:
    """Reads scoresheet images into SAN move tokens."""

    def __init__(self, model: ScoresheetModel, vocabulary: Vocabulary):
        if len(vocabulary) != model.config.vocab_size:
            raise IncompatibleCheckpointError(
                f"vocabulary has {len(vocabulary)} codes, model expects {model.config.vocab_size}")
        self.model = model
        self.vocabulary = vocabulary

    @staticmethod
    def from_files(checkpoint_path, vocabulary_path) -> "ScoresheetReader":
        vocabulary = Vocabulary.load(vocabulary_path)
        model, _ = load_checkpoint(checkpoint_path, vocabulary.digest())
        Logger.info(f"Reader ready ({len(vocabulary)} codes, image {model.config.image_size}).")
        return ScoresheetReader(model, vocabulary)

    def prepare(self, image: Union[np.ndarray, str, Path]) -> np.ndarray:
        if not isinstance(image, np.ndarray):
            image = FileManager.load_pgm(image)
        if image.ndim == 3:
            image = image.mean(axis=2).astype(image.dtype)
        return ImageProcessor.resize_to(image, self.model.config.image_size)

    def read(self, image: Union[np.ndarray, str, Path]) -> ReadResult:
        pixels = self.prepare(image)
        result = self.model.forward_free_running(pixels[None])
        codes = result.predictions[0]
        tokens = self.vocabulary.decode(codes)
        Logger.debug(f"Read {len(tokens)} move(s): {' '.join(tokens)}")
        return ReadResult(tokens, codes, result.attention)


__all__ = ["ReadResult", "ScoresheetReader"]
