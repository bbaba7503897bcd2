"""
Core package for Scoresheet Reader
"""

from .image_processor import ImageProcessor
from .notation import GameRecord, LangMap, SanMove, parse_pgn, parse_pgn_games, translate_moves
from .vocabulary import Vocabulary, build_vocabulary
