"""Shared fixtures for the solver tests."""
import numpy as np
import pytest

from solver.optimality import A_0, A_A, A_B, I_MINUS, I_PLUS, IterateState
from solver.problems import CDConfig, GridSpec, make_convection_diffusion, make_poisson


def mixed_iterate(prob, seed=0):
    """Random iterate whose partition visits all five index sets with a safety margin.

    Returns the iterate and the expected label of every index.
    """
    rng = np.random.default_rng(seed)
    n, beta = prob.n, prob.beta
    labels = np.arange(n) % 5
    rng.shuffle(labels)
    u = np.zeros(n)
    mu = np.zeros(n)

    sel = labels == A_B
    u[sel] = prob.b[sel] + 1.0
    mu[sel] = beta + 1.0
    sel = labels == A_A
    u[sel] = prob.a[sel] - 1.0
    mu[sel] = -beta - 1.0
    sel = labels == A_0
    mu[sel] = beta * rng.uniform(-0.5, 0.5, sel.sum())
    sel = labels == I_PLUS
    u[sel] = rng.uniform(1.0, 5.0, sel.sum())
    mu[sel] = beta * (1.0 + 0.5 * rng.uniform(0.0, 1.0, sel.sum()))
    sel = labels == I_MINUS
    u[sel] = -rng.uniform(1.0, 5.0, sel.sum())
    mu[sel] = -beta * (1.0 + 0.5 * rng.uniform(0.0, 1.0, sel.sum()))

    x = IterateState(rng.standard_normal(n), u, rng.standard_normal(n), mu)
    return x, labels.astype(np.int8)


@pytest.fixture
def poisson():
    """Poisson 2D, level 3 (n = 64)."""
    return make_poisson(GridSpec(2, 3), alpha=1e-2, beta=1e-4)


@pytest.fixture
def convdiff():
    """Convection-diffusion on an 8 x 8 interior grid (n = 64)."""
    return make_convection_diffusion(GridSpec.from_points(8), CDConfig(), alpha=1e-2, beta=1e-4)


@pytest.fixture(params=["poisson", "convdiff"])
def problem(request):
    return request.getfixturevalue(request.param)
