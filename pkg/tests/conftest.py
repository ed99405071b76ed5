import os
import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

from isoflow import BackgroundProfile, Grid, Params  # noqa: E402

settings.register_profile(
    "default", max_examples=25, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@pytest.fixture
def grid():
    return Grid(32, 16)


@pytest.fixture
def grid2d():
    return Grid(16, 8, d=2, ny=8)


@pytest.fixture
def rest(grid):
    return BackgroundProfile.uniform(grid)


@pytest.fixture
def params():
    return Params(mu=1e-3, kappa=0.1)


def smooth_field(grid, rng, modes=3, amp=0.1):
    """Band-limited random scalar field with smooth density structure."""
    f = grid.zeros()
    s = (grid.rho_b - grid.rho0) / (grid.rho1 - grid.rho0)
    for a in range(1, modes + 1):
        for b in range(3):
            phase = rng.uniform(0, 2 * np.pi)
            arg = sum(a * xx for xx in grid.x) + phase
            f = f + amp * rng.normal() * np.cos(arg) * np.cos(b * np.pi * s) / a**2
    return f


ACCEPTANCE_LINES = []


def record_acceptance(number, passed, detail):
    """Store one acceptance line for the terminal summary and echo it."""
    line = f"{'PASS' if passed else 'FAIL'} criterion {number}: {detail}"
    ACCEPTANCE_LINES.append((number, line))
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
