import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from symae.data_io import generate_pga


@pytest.fixture(scope="session")
def pga100():
    """Small gaussian-bump snapshot matrix (514 x 100)."""
    return generate_pga(100, seed=3).U


@pytest.fixture(scope="session")
def pga400():
    """Full-size gaussian-bump snapshot matrix (514 x 400)."""
    return generate_pga(400, seed=0).U
