import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from src.core.rng import RngStream


def pytest_configure(config):
    config.addinivalue_line('markers', 'slow: долгие статистические проверки')


@pytest.fixture
def rng():
    return RngStream(12345)
