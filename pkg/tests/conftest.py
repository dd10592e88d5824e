import numpy as np
import pytest

from riskcert.bnn import BnnModel, LayerSpec


def dense(W, b, std=0.0, bstd=None, activation="linear"):
    W = np.asarray(W, dtype=float)
    b = np.asarray(b, dtype=float)
    bstd = std if bstd is None else bstd
    return LayerSpec(W, np.full(W.shape, float(std)), b, np.full(b.shape, float(bstd)), activation)


def model_of(*layers):
    return BnnModel(tuple(layers))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
