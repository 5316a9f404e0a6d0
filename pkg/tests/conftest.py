import numpy as np
import pytest

from virodiff.mesh import build_grid
from virodiff.model import Parameters, lambda_builder

CANONICAL = dict(k=1e-5, N=100.0, mu_T=0.1, mu_I=0.5, mu_V=5.0, D_T=0.01, D_I=0.01, D_V=0.01)


def make_params(grid, lam=10.0, **overrides):
    """Canonical parameter set on ``grid`` with constant or given supply."""
    if np.isscalar(lam):
        lam = lambda_builder("constant", grid, value=lam)
    scalars = {**CANONICAL, **overrides}
    return Parameters(lam=lam, **scalars)


def homogeneous_eta_one(n=16, **overrides):
    """Neumann, constant lambda: k T_inf = 4, N mu_I = 1, so eta0 = 1."""
    g = build_grid(1, [1.0], [n], "neumann")
    kw = dict(k=1.0, N=1.0, mu_T=1.0, mu_I=1.0, mu_V=1.0, D_T=0.1, D_I=0.1, D_V=0.1)
    kw.update(overrides)
    return make_params(g, lam=4.0, **kw)


@pytest.fixture
def grid1d():
    return build_grid(1, [1.0], [32], "neumann")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
