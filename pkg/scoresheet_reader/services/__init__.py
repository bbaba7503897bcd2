"""
Services package for Scoresheet Reader
"""

from .managers import CurveHistory, RunConfigManager
