import numpy as np
import pytest

import acar


@pytest.fixture
def theta1():
    return acar.benchmark_theta(1)


@pytest.fixture
def sim_pair(theta1):
    """A medium simulated (series, covariates) pair from benchmark set 1."""
    X = acar.simulate_covariates(200, 5, 11)
    y = acar.simulate_path(acar.SimConfig(theta=theta1, n=200, P=5, seed=7), X)
    return y, X


def random_theta(rng, K=3, P=5, beta_cap=0.9):
    """Random interior parameter vector."""
    return acar.ParameterVector(
        omega=rng.uniform(-1.5, 1.5, K),
        gamma=rng.uniform(-1.5, 1.5, P),
        alpha=rng.uniform(-1.5, 1.5, K),
        beta=rng.uniform(-beta_cap, beta_cap, K),
    )


def finite_difference_gradient(func, x, h=1e-6):
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    for i in range(x.size):
        xp, xm = x.copy(), x.copy()
        xp[i] += h
        xm[i] -= h
        out[i] = (func(xp) - func(xm)) / (2.0 * h)
    return out
