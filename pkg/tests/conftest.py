import functools

import numpy as np
import pytest
from scipy.linalg import toeplitz

from specmoment.filterbank import toeplitz_bank
from specmoment.instances import random_instance
from specmoment.numerics import CircleGrid
from specmoment.solvers import solve_newton

GRID = CircleGrid(4096)
SEC5_LAGS = np.array([20.0, 15.0, 6.0, 1.0, 0.0, 0.0, 0.0, 0.0])
N_INSTANCES = 20


@pytest.fixture(scope="session")
def grid():
    return GRID


@pytest.fixture(scope="session")
def sec5():
    """Bank and covariance of the eight-lag moving-average example."""
    return toeplitz_bank(8), toeplitz(SEC5_LAGS)


@functools.lru_cache(maxsize=None)
def instance(seed):
    return random_instance(seed, GRID)


@functools.lru_cache(maxsize=None)
def solved(seed):
    inst = instance(seed)
    return solve_newton(inst.Sigma, inst.prior, inst.bank)


@pytest.fixture(scope="session")
def random_solves():
    return [(instance(s), solved(s)) for s in range(N_INSTANCES)]


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod and mod.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(mod.RESULTS):
            terminalreporter.write_line(line)
