import os

import numpy as np
import pytest

from tispde import HermiteRep
from tispde.hermite import basis

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
CONFIGS = os.path.join(ROOT, "configs")


def config_path(name):
    return os.path.join(CONFIGS, f"{name}.json")


def random_headroom(d, N, rng, p=0.0):
    """Random rep supported on degrees <= N - 2."""
    b = basis(d, N)
    c = rng.standard_normal(b.size) * (b.degrees <= N - 2)
    return HermiteRep(d, N, c, p)


@pytest.fixture
def rng():
    return np.random.default_rng(20241016)


# one line per acceptance criterion, filled in by tests/test_acceptance.py
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[k])
