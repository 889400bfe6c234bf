import numpy as np
import pytest

from erwstat.rng import RngStream
from erwstat.walk import MemoryParams, WalkPath, simulate_walk

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def random_paths():
    """Simulated paths over a spread of memory parameters and lengths."""
    rng = np.random.default_rng(20240501)
    out = []
    for i in range(60):
        p = float(rng.uniform(0, 1))
        n = int(rng.integers(2, 400))
        out.append(simulate_walk(MemoryParams(p), n, RngStream(11, i)))
    return out


def path(*steps):
    return WalkPath(list(steps))
