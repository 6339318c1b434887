import pytest

from gelsim import _core


@pytest.fixture(scope="session", autouse=True)
def warm_jit():
    # compile the hot path once so individual test timings stay meaningful
    _core.warmup()
