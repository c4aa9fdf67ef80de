from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from planweave.backends import build_mock_suite
from planweave.model import Goal

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture
def mock_suite(tmp_path):
    return build_mock_suite(tmp_path / "store", seed=42)


@pytest.fixture
def sample_goal() -> Goal:
    return Goal(id="g-candy", title="How to make a candy bouquet", dataset="demo")
