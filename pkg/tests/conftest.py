import time

import numpy as np
import pytest

from nlsground import NonlinearityModel, gaussian_pair, make_grid, solve_ground_state, sweep_mu

from cases import MATRIX, power_config

SWEEP_MU = (1.0, 2.0, 4.0, 8.0)


@pytest.fixture(scope="session")
def grid2048():
    return make_grid(12.0, 2048, "uniform")


@pytest.fixture(scope="session")
def gauss(grid2048):
    return gaussian_pair(grid2048)


@pytest.fixture(scope="session")
def power():
    return NonlinearityModel("pure_power", 1.0, 6.0)


@pytest.fixture(scope="session")
def coupled():
    return NonlinearityModel("coupled_exp", 1.0, 6.0, 1.0)


@pytest.fixture(scope="session")
def solved():
    """Lazily solved ``(report, config)`` per matrix case, cached for the session."""
    cache = {}

    def get(name):
        if name not in cache:
            config = MATRIX[name]()
            cache[name] = (solve_ground_state(config), config)
        return cache[name]

    return get


@pytest.fixture(scope="session")
def sweeps():
    """Pure-power mu sweeps for sigma = 6 and 8: ``{sigma: (result, config, seconds)}``."""
    out = {}
    for sigma in (6.0, 8.0):
        config = power_config(sigma=sigma)
        t0 = time.perf_counter()
        res = sweep_mu(config, SWEEP_MU)
        out[sigma] = (res, config, time.perf_counter() - t0)
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
