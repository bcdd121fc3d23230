import numpy as np
import pytest

from dpnash.game import Game
from dpnash.network import fully_connected

TABLE1_C = [0.015, 0.03, 0.02, 0.015, 0.025, 0.03]
TABLE1_D = [15, 18, 25, 20, 18, 20]

ACCEPTANCE_LINES = []


@pytest.fixture
def table1():
    return Game.from_arrays(TABLE1_C, TABLE1_D, 100.0)


@pytest.fixture
def graph6():
    return fully_connected(6, 0.1)


def random_game(rng, count=None, a=None):
    n = int(count if count is not None else rng.integers(3, 9))
    c = rng.uniform(0.005, 0.05, n)
    d = rng.uniform(5.0, 30.0, n)
    return Game.from_arrays(c, d, float(a if a is not None else rng.uniform(5.0, 200.0)))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
