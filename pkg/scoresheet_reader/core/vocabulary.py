"""
Closed move vocabulary for Scoresheet Reader.

Codes are dense: the four special words take codes 0..3 and the move tokens
follow in descending corpus frequency (lexicographic tie-break).
"""

from __future__ import annotations

import hashlib
from collections import Counter
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence

from scoresheet_reader.core.notation import GameRecord
from scoresheet_reader.errors import CodeRangeError, VocabularyError

START, END, PAD, UNK = "<START>", "<END>", "<PAD>", "<UNK>"
SPECIAL_TOKENS = (START, END, PAD, UNK)
START_CODE, END_CODE, PAD_CODE, UNK_CODE = 0, 1, 2, 3
NUM_SPECIALS = len(SPECIAL_TOKENS)


class Vocabulary:
    """Ordered token <-> code map with reserved START/END/PAD/UNK."""

    def __init__(self, moves: Sequence[str]):
        tokens = list(SPECIAL_TOKENS) + list(moves)
        code_of = {tok: code for code, tok in enumerate(tokens)}
        if len(code_of) != len(tokens):
            raise VocabularyError("duplicate token in vocabulary")
        self._tokens: List[str] = tokens
        self._code_of: Dict[str, int] = code_of

    # ----------------------------- lookups -----------------------------
    def __len__(self) -> int:
        return len(self._tokens)

    def __contains__(self, token: str) -> bool:
        return token in self._code_of

    @property
    def tokens(self) -> List[str]:
        return list(self._tokens)

    @property
    def moves(self) -> List[str]:
        return self._tokens[NUM_SPECIALS:]

    @property
    def move_codes(self) -> range:
        """Codes of every non-special token."""
        return range(NUM_SPECIALS, len(self._tokens))

    def code_of(self, token: str) -> int:
        return self._code_of.get(token, UNK_CODE)

    def token_of(self, code: int) -> str:
        if not 0 <= code < len(self._tokens):
            raise CodeRangeError(f"code {code} outside vocabulary of size {len(self._tokens)}")
        return self._tokens[code]

    # ----------------------------- encode / decode -----------------------------
    def encode(self, seq: Iterable[str], append_end: bool = True) -> List[int]:
        """Map tokens to codes (OOV -> UNK) and append END."""
        codes = [self.code_of(str(tok)) for tok in seq]
        if append_end:
            codes.append(END_CODE)
        return codes

    def decode(self, codes: Iterable[int]) -> List[str]:
        """Map codes back to tokens, dropping PAD/START and stopping at END."""
        out: List[str] = []
        for code in codes:
            code = int(code)
            token = self.token_of(code)
            if code == END_CODE:
                break
            if code in (PAD_CODE, START_CODE):
                continue
            out.append(token)
        return out

    # ----------------------------- persistence -----------------------------
    def to_text(self) -> str:
        return "".join(f"{code}\t{tok}\n" for code, tok in enumerate(self._tokens))

    def digest(self) -> str:
        """SHA-256 of the serialized vocabulary; stored in checkpoints."""
        return hashlib.sha256(self.to_text().encode("utf-8")).hexdigest()

    def save(self, path) -> None:
        Path(path).write_text(self.to_text(), encoding="utf-8")

    @staticmethod
    def load(path) -> "Vocabulary":
        rows = []
        for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
            if not line.strip():
                continue
            try:
                code_text, token = line.split("\t")
                rows.append((int(code_text), token))
            except ValueError as exc:
                raise VocabularyError(f"{path}:{lineno}: expected 'code<TAB>token'") from exc
        if [c for c, _ in rows] != list(range(len(rows))):
            raise VocabularyError(f"{path}: codes must be dense and ascending")
        if tuple(tok for _, tok in rows[:NUM_SPECIALS]) != SPECIAL_TOKENS:
            raise VocabularyError(f"{path}: special tokens must occupy codes 0..3")
        return Vocabulary([tok for _, tok in rows[NUM_SPECIALS:]])

    def __eq__(self, other) -> bool:
        return isinstance(other, Vocabulary) and self._tokens == other._tokens

    def __repr__(self) -> str:
        return f"Vocabulary(size={len(self)})"


def build_vocabulary(corpus: Sequence[GameRecord], positions: int, cap: Optional[int] = None) -> Vocabulary:
    """Collect the tokens of the first *positions* moves of every game.

    At most *cap* move tokens are kept (most frequent first).
    """
    if positions < 1:
        raise VocabularyError(f"positions must be >= 1, got {positions}")
    if not corpus:
        raise VocabularyError("cannot build a vocabulary from an empty corpus")
    counts: Counter[str] = Counter()
    for game in corpus:
        counts.update(m.text for m in game.moves[:positions])
    if not counts:
        raise VocabularyError("corpus holds no moves")
    ordered = sorted(counts, key=lambda tok: (-counts[tok], tok))
    if cap is not None:
        ordered = ordered[:cap]
    return Vocabulary(ordered)


__all__ = [
    "Vocabulary",
    "build_vocabulary",
    "SPECIAL_TOKENS",
    "START_CODE",
    "END_CODE",
    "PAD_CODE",
    "UNK_CODE",
    "NUM_SPECIALS",
]
