"""
Exception hierarchy for Scoresheet Reader.

Data errors map to CLI exit code 2, numeric failures to exit code 3.
"""

from typing import Optional, Sequence


class ReaderError(Exception):
    """Base class for every error raised by the package."""

    exit_code = 2


# ---------------------------------------------------------------------------
# Data / configuration errors
# ---------------------------------------------------------------------------


class DataError(ReaderError):
    pass


class ConfigError(DataError):
    pass


class NotationError(DataError):
    pass


class PGNParseError(NotationError):
    def __init__(self, message: str, offset: int, token: str = ""):
        super().__init__(f"{message} at byte offset {offset}" + (f": {token!r}" if token else ""))
        self.offset = offset
        self.token = token


class TranslationError(NotationError):
    def __init__(self, move: str, letter: str):
        super().__init__(f"no mapping for piece letter {letter!r} in move {move!r}")
        self.move = move
        self.letter = letter


class VocabularyError(DataError):
    pass


class CodeRangeError(VocabularyError):
    pass


class RenderError(DataError):
    pass


class CompositionError(DataError):
    pass


class IncompatibleCheckpointError(DataError):
    pass


# ---------------------------------------------------------------------------
# Tensor / numeric errors
# ---------------------------------------------------------------------------


class ShapeError(ReaderError):
    def __init__(self, op: str, *shapes: Sequence[int], detail: Optional[str] = None):
        shown = ", ".join(str(tuple(s)) for s in shapes)
        msg = f"{op}: incompatible shapes {shown}"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)
        self.op = op
        self.shapes = shapes


class BackwardError(ReaderError):
    pass


class OptimizerError(ReaderError):
    pass


class NumericError(ReaderError):
    exit_code = 3

    def __init__(self, message: str, epoch: Optional[int] = None,
                 batch: Optional[int] = None, loss: Optional[float] = None):
        details = [f"{k}={v}" for k, v in (("epoch", epoch), ("batch", batch), ("loss", loss)) if v is not None]
        super().__init__(message + (f" [{', '.join(details)}]" if details else ""))
        self.epoch = epoch
        self.batch = batch
        self.loss = loss


class GradientCheckError(NumericError):
    pass
