import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from helpers import ramp_network, corridor_network  # noqa: E402


@pytest.fixture
def ramp_net():
    return ramp_network()


@pytest.fixture
def corridor_net():
    return corridor_network()
