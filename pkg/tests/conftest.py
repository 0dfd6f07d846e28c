import numpy as np
import pytest

from qcae.qtensor import QTensor
from qcae.quat import Quaternion


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_quaternion(rng, scale=1.0):
    return Quaternion(*(scale * rng.standard_normal(4)))


def random_qtensor(rng, c, h, w):
    return QTensor(rng.standard_normal((c, 4, h, w)))


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
