import numpy as np
import pytest
from hypothesis import settings

from movingtraps.rng import StreamKey

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")


@pytest.fixture
def key():
    return StreamKey(12345)


def within(value, reference, se, k=3.0):
    return abs(value - reference) <= k * se


@pytest.fixture
def rng():
    return np.random.default_rng(7)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
