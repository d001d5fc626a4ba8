import numpy as np
import pytest

from noisydpc import ChannelConfig

NOMINAL = ChannelConfig(10.0, 5.0, 1.0, (2.0,), (3.0,))


def log_uniform(rng, size=None, lo=-2.0, hi=2.0):
    return 10.0 ** rng.uniform(lo, hi, size)


def random_config(rng, max_per_side=4, min_per_side=0):
    p, q, n0 = log_uniform(rng, 3)
    tx = log_uniform(rng, rng.integers(min_per_side, max_per_side + 1))
    rx = log_uniform(rng, rng.integers(min_per_side, max_per_side + 1))
    return ChannelConfig(p, q, n0, tuple(tx), tuple(rx))


@pytest.fixture
def nominal():
    return NOMINAL


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# one PASS/FAIL line per acceptance criterion, echoed after the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
