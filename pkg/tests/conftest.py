from __future__ import annotations

import sys
from pathlib import Path

import pytest

TESTS_DIR = Path(__file__).parent
REPO_ROOT = TESTS_DIR.parent
GOLDEN_DIR = REPO_ROOT / "golden"

sys.path.insert(0, str(TESTS_DIR))


@pytest.fixture(scope="session")
def golden_dir() -> Path:
    return GOLDEN_DIR


def golden_files() -> list[Path]:
    return sorted(GOLDEN_DIR.glob("*.jsonl"))
