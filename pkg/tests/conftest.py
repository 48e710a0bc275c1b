import os

import numpy as np
import pytest

from sftembed.measures import MarkovSource
from sftembed.sft import full_shift, golden_mean

GOLDEN = os.path.join(os.path.dirname(__file__), "golden")

# acceptance criteria report their verdicts here; printed once at session end
ACCEPTANCE = {}

DEMO_P = np.array([[0.97, 0.03], [0.1, 0.9]])
OTHER_P = np.array([[0.96, 0.04], [0.3, 0.7]])


def golden_path(name):
    return os.path.join(GOLDEN, name)


@pytest.fixture
def full2():
    return full_shift(2)


@pytest.fixture
def gm():
    return golden_mean()


@pytest.fixture
def demo_source():
    return MarkovSource(DEMO_P)


@pytest.fixture
def other_source():
    return MarkovSource(OTHER_P)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
