import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from qcore import rng_stream  # noqa: E402


@pytest.fixture
def rng():
    return rng_stream(12345)


@pytest.fixture
def rng_factory():
    """Independent streams for tests that need several"""
    return lambda index: rng_stream(12345, index)



def pytest_configure(config):
    config.addinivalue_line("markers", "slow: full-scale runs of the experiment commands")
