"""
Utils package for Scoresheet Reader
"""

from .logger import Logger
from .file_manager import FileManager
