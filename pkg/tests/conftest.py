import os
import sys

import numpy as np
import pytest
from hypothesis import settings

sys.path.insert(0, os.path.dirname(__file__))

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_state(rng, nmax, support=None, decay=0.15):
    support = nmax if support is None else support
    a = np.zeros(nmax, dtype=complex)
    env = np.exp(-decay * np.arange(support))
    a[:support] = env * (rng.normal(size=support) + 1j * rng.normal(size=support))
    return a


def pytest_terminal_summary(terminalreporter):
    from acceptance_log import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
