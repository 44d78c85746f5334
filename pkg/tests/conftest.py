import numpy as np
import pytest

from discerr import Model, RngStream


@pytest.fixture
def bm():
    return Model("B")


@pytest.fixture
def gbm():
    return Model("S")


@pytest.fixture
def stream():
    return RngStream(20240601)


def within_se(estimate, target, se, k=3.0):
    return abs(estimate - target) <= k * se


def mean_and_se(x):
    x = np.asarray(x, dtype=float)
    return x.mean(), x.std(ddof=1) / np.sqrt(x.size)


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
