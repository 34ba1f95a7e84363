import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def blobs(rng, n=40, d=2, gap=3.0):
    """Two Gaussian clouds centred at 0 and ``gap`` along the first axis."""
    from gbftsvm import Dataset

    half = n // 2
    A = rng.normal(size=(half, d))
    B = rng.normal(size=(n - half, d))
    B[:, 0] += gap
    X = np.vstack([A, B])
    y = np.r_[np.ones(half, int), -np.ones(n - half, int)]
    return Dataset(X, y)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
