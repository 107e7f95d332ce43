import math

import numpy as np
import pytest

from dloplace.elastica import StiffnessSpec
from dloplace.placement import RollDirection, SurfaceSpec
from dloplace.planner import GridSpec
from dloplace.scenarios import generate_paths

L = 0.3


@pytest.fixture(scope="session")
def stiffness():
    return StiffnessSpec(1.0, L)


@pytest.fixture(scope="session")
def surface():
    return SurfaceSpec()


@pytest.fixture(scope="session")
def grid():
    return GridSpec.default(L)


@pytest.fixture(scope="session")
def nominal_paths(stiffness, surface, grid):
    """Four planned paths (both directions) shared by the planner and controller tests."""
    paths, _ = generate_paths(4, 11, stiffness, surface, grid, (0.05, 0.15))
    return paths


@pytest.fixture(scope="session")
def short_path(stiffness, surface, grid):
    """A short plan (shallow drop) for closed-loop runs."""
    paths, _ = generate_paths(1, 3, stiffness, surface, grid, (0.01, 0.03), roll=(10.0, 30.0))
    return paths[0]


def angle_close(a, b, tol):
    return abs(math.remainder(a - b, 2 * math.pi)) <= tol


def rng(seed=0):
    return np.random.default_rng(seed)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import REPORT
    except ImportError:
        return
    if REPORT:
        terminalreporter.section("acceptance criteria")
        for line in REPORT:
            terminalreporter.write_line(line)
