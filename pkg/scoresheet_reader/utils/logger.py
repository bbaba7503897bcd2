"""
Logger utility for Scoresheet Reader
"""

import sys
from datetime import datetime

_LEVELS = {'DEBUG': 10, 'INFO': 20, 'WARNING': 30, 'ERROR': 40}


class Logger:
    """Simple logging utility with timestamp.

    Diagnostics go to stderr; stdout is kept free for machine-readable
    summaries printed by the command line.
    """

    _threshold = _LEVELS['INFO']

    @staticmethod
    def set_level(level: str):
        Logger._threshold = _LEVELS[level.upper()]

    @staticmethod
    def _emit(level: str, message: str):
        if _LEVELS[level] < Logger._threshold:
            return
        timestamp = datetime.now().strftime('%H:%M:%S')
        print(f"[{timestamp}] {level}: {message}", file=sys.stderr)

    @staticmethod
    def info(message: str):
        Logger._emit('INFO', message)

    @staticmethod
    def error(message: str):
        Logger._emit('ERROR', message)

    @staticmethod
    def debug(message: str):
        Logger._emit('DEBUG', message)

    @staticmethod
    def warning(message: str):
        Logger._emit('WARNING', message)
