import sys
from pathlib import Path

import pytest

REPO_ROOT = Path(__file__).resolve().parent.parent
TOY_DIR = REPO_ROOT / "data" / "toy"

sys.path.insert(0, str(Path(__file__).parent))


@pytest.fixture
def toy_dir() -> Path:
    return TOY_DIR


@pytest.fixture
def toy_queries():
    return [
        "penguins adaptations",
        "penguins animals",
        "penguins animals facts",
        "penguins hockey",
    ]
