"""
Chess notation helpers for Scoresheet Reader.

Parses PGN movetext into SAN move lists (move numbers, tag pairs, comments and
result tokens removed) and translates piece letters between the language a
scoresheet is written in and the English notation PGN files use.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

from scoresheet_reader.errors import ConfigError, NotationError, PGNParseError, TranslationError
from scoresheet_reader.utils.paths import get_data_dir

# Piece letters (king first) and the pieces a pawn may promote to, per language.
PIECE_LETTERS: Dict[str, str] = {
    "en": "KQRBN",
    "pt": "RDTBC",
}
PROMOTION_LETTERS: Dict[str, str] = {
    "en": "QRBN",
    "pt": "DTBC",
}

RESULT_TOKENS = frozenset({"1-0", "0-1", "1/2-1/2", "*"})

DEFAULT_LANGMAP_FILE = "langmap_pt.tsv"

# ---------------------------------------------------------------------------
# SAN grammar
# ---------------------------------------------------------------------------

_SAN_PATTERNS: Dict[str, re.Pattern] = {}


def _san_pattern(language: str) -> re.Pattern:
    pattern = _SAN_PATTERNS.get(language)
    if pattern is None:
        if language not in PIECE_LETTERS:
            raise NotationError(f"unknown notation language {language!r}")
        pieces = re.escape(PIECE_LETTERS[language])
        promos = re.escape(PROMOTION_LETTERS[language])
        pattern = re.compile(
            rf"""^(?:
                [{pieces}]?[a-h]?[1-8]?x?[a-h][1-8](?:=[{promos}])?
                |O-O-O
                |O-O
            )[+#]?$""",
            re.VERBOSE,
        )
        _SAN_PATTERNS[language] = pattern
    return pattern


@dataclass(frozen=True)
class SanMove:
    """One written move, e.g. ``Nf3``, ``O-O`` or ``bxc6``."""

    text: str
    language: str = "en"

    def __post_init__(self):
        if not SanMove.is_valid(self.text, self.language):
            raise NotationError(f"not a {self.language} SAN move: {self.text!r}")

    @staticmethod
    def is_valid(text: str, language: str = "en") -> bool:
        if not text or any(ch.isspace() for ch in text):
            return False
        return _san_pattern(language).match(text) is not None

    def __str__(self) -> str:
        return self.text


@dataclass
class GameRecord:
    moves: List[SanMove] = field(default_factory=list)
    metadata: Dict[str, str] = field(default_factory=dict)

    @property
    def tokens(self) -> List[str]:
        return [m.text for m in self.moves]


# ---------------------------------------------------------------------------
# PGN parsing
# ---------------------------------------------------------------------------

TAG_REGEX = re.compile(r'^\[\s*([A-Za-z0-9][A-Za-z0-9_+#=:-]*)\s+"((?:[^"\\]|\\.)*)"\s*\]$')

_LEXER = re.compile(
    r"""
    (?P<tag>\[[^\]\n]*\])
    |(?P<comment>\{[^}]*\})
    |(?P<line_comment>;[^\n]*)
    |(?P<ws>\s+)
    |(?P<word>[^\s\[\]{};()]+)
    |(?P<bad>.)
    """,
    re.VERBOSE | re.DOTALL,
)

_MOVE_NUMBER = re.compile(r"^(\d+)(\.+)(.*)$")
_NAG = re.compile(r"^\$\d+$")
_ANNOTATION = re.compile(r"[!?]+$")


def _lex(text: str) -> Iterator[Tuple[str, str, int]]:
    """Yield ``(kind, value, byte_offset)`` for every lexeme of *text*."""
    byte_offset = 0
    for m in _LEXER.finditer(text):
        value = m.group()
        yield m.lastgroup, value, byte_offset
        byte_offset += len(value.encode("utf-8"))


def _iter_games(text: str, language: str) -> Iterator[GameRecord]:
    game = GameRecord()
    started = False
    for kind, value, offset in _lex(text):
        if kind in ("ws", "comment", "line_comment"):
            continue
        if kind == "bad":
            raise PGNParseError("malformed token", offset, value)
        if kind == "tag":
            m = TAG_REGEX.match(value)
            if m is None:
                raise PGNParseError("malformed tag pair", offset, value)
            if game.moves:
                # A tag section after moves without a result starts a new game.
                yield game
                game = GameRecord()
            game.metadata[m.group(1)] = m.group(2)
            started = True
            continue

        word = value
        if word in RESULT_TOKENS:
            yield game
            game = GameRecord()
            started = False
            continue
        if _NAG.match(word):
            continue
        number = _MOVE_NUMBER.match(word)
        if number is not None:
            word = number.group(3)
            if not word:
                continue
            offset += len((number.group(1) + number.group(2)).encode("utf-8"))
        san = _ANNOTATION.sub("", word)
        if not SanMove.is_valid(san, language):
            raise PGNParseError("malformed token", offset, word)
        game.moves.append(SanMove(san, language))
        started = True

    if started or game.moves:
        yield game


def parse_pgn(text: str, language: str = "en") -> GameRecord:
    """Parse the movetext of one game into a :class:`GameRecord`.

    Result tokens are dropped wherever they occur; use
    :func:`parse_pgn_games` for files holding several games.
    """
    record = GameRecord()
    for game in _iter_games(text, language):
        record.moves.extend(game.moves)
        for key, value in game.metadata.items():
            record.metadata.setdefault(key, value)
    return record


def parse_pgn_games(text: str, language: str = "en") -> List[GameRecord]:
    """Split a PGN file into games. Games with no moves are skipped."""
    return [g for g in _iter_games(text, language) if g.moves]


def load_pgn_file(path, language: str = "en") -> List[GameRecord]:
    return parse_pgn_games(Path(path).read_text(encoding="utf-8"), language)


# ---------------------------------------------------------------------------
# Language translation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LangMap:
    """Piece-letter table from a *source* notation language to a *target* one."""

    table: Dict[str, str]
    source: str = "pt"
    target: str = "en"

    def __post_init__(self):
        if len(set(self.table.values())) != len(self.table):
            raise ConfigError(f"piece-letter table {self.source}->{self.target} is not bijective")
        for letter in list(self.table) + list(self.table.values()):
            if len(letter) != 1 or not letter.isupper() or letter == "O":
                raise ConfigError(f"invalid piece letter {letter!r} in table")

    def inverted(self) -> "LangMap":
        return LangMap({v: k for k, v in self.table.items()}, self.target, self.source)

    def translate(self, text: str) -> str:
        chars = list(text)
        for i, ch in enumerate(chars):
            is_piece = (i == 0 and ch.isupper() and ch != "O") or (i > 0 and chars[i - 1] == "=")
            if not is_piece:
                continue
            mapped = self.table.get(ch)
            if mapped is None:
                raise TranslationError(text, ch)
            chars[i] = mapped
        return "".join(chars)

    @staticmethod
    def load(path, source: str = "pt", target: str = "en") -> "LangMap":
        """Read a two-column ``local<TAB>english`` table. ``#`` starts a comment."""
        table: Dict[str, str] = {}
        for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            cols = line.split()
            if len(cols) != 2:
                raise ConfigError(f"{path}:{lineno}: expected two columns, got {line!r}")
            table[cols[0]] = cols[1]
        return LangMap(table, source, target)

    @staticmethod
    def default() -> "LangMap":
        """Portuguese -> English table shipped in ``data/``."""
        return LangMap.load(get_data_dir() / DEFAULT_LANGMAP_FILE)


def translate_moves(moves: Sequence[SanMove], lang_map: LangMap) -> List[SanMove]:
    """Substitute piece letters per *lang_map*; every other character is kept."""
    return [SanMove(lang_map.translate(m.text), lang_map.target) for m in moves]


def translate_token(token: str, lang_map: Optional[LangMap]) -> str:
    return token if lang_map is None else lang_map.translate(token)


__all__ = [
    "SanMove",
    "GameRecord",
    "LangMap",
    "parse_pgn",
    "parse_pgn_games",
    "load_pgn_file",
    "translate_moves",
    "translate_token",
    "PIECE_LETTERS",
    "RESULT_TOKENS",
]
