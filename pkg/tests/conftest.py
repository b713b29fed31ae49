import numpy as np
import pytest

from aenet.config import tiny_config
from aenet.data import generate_dataset
from aenet.numerics import SplitMix64


@pytest.fixture
def rng():
    return SplitMix64(1234)


@pytest.fixture
def nprng():
    return np.random.default_rng(7)


@pytest.fixture
def tiny_cfg():
    return tiny_config()


@pytest.fixture
def tiny_data(tiny_cfg):
    return generate_dataset(tiny_cfg)


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def acceptance_log():
    return ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
