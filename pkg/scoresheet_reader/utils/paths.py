import os
from pathlib import Path

# Points the corpus/language-table lookup at another data directory.
DATA_DIR_ENV = "SCORESHEET_DATA_DIR"


def get_base_dir() -> Path:
    return Path(__file__).resolve().parents[2]


def get_data_dir() -> Path:
    override = os.environ.get(DATA_DIR_ENV)
    if override:
        return Path(override)
    bundled = get_base_dir() / "data"
    if bundled.exists():
        return bundled
    return Path.cwd() / "data"


def ensure_dir(path) -> Path:
    """Create *path* (and parents) if needed and return it as a Path."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    return path
