import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from pathmed import Dataset, standardize

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("quick", deadline=None, max_examples=15)
settings.register_profile("thorough", deadline=None, max_examples=400)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


def random_raw(rng, n=30, p1=3, p2=4, noise=1.0):
    x = rng.normal(size=n)
    m1 = np.outer(x, rng.normal(size=p1)) + noise * rng.normal(size=(n, p1))
    lam = rng.normal(size=(p1, p2)) * 0.5
    m2 = np.outer(x, rng.normal(size=p2)) + m1 @ lam + noise * rng.normal(size=(n, p2))
    y = x + m1 @ rng.normal(size=p1) + m2 @ rng.normal(size=p2) + noise * rng.normal(size=n)
    return Dataset(x=x, m1=m1, m2=m2, y=y)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def small_data(rng):
    return standardize(random_raw(rng))
