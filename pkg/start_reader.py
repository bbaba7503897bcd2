"""
Start Script for Scoresheet Reader
"""

import sys
from scoresheet_reader.main import main

if __name__ == "__main__":
    sys.exit(main())
