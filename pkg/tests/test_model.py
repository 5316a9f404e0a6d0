import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import make_params
from virodiff import kernels
from virodiff.mesh import build_grid
from virodiff.model import State, check_initial_data, lambda_builder, reaction, validate


def one_node(T, I, V, lam=10.0, **kw):
    g = build_grid(1, [1.0], [3], "neumann")
    return State(g, T, I, V), make_params(g, lam=lam, **kw)


def test_reaction_arithmetic():
    s, p = one_node(1000.0, 0.0, 1e5)
    fT, fI, fV = reaction(s, p)
    np.testing.assert_allclose(fT, -1090.0)


@pytest.mark.parametrize("T,V", [(0.0, 50.0), (70.0, 0.0)])
def test_no_infection_without_both(T, V):
    s, p = one_node(T, 3.0, V)
    _, fI, _ = reaction(s, p)
    np.testing.assert_allclose(fI, -p.mu_I * 3.0)


@given(st.floats(0, 1e4), st.floats(0, 1e3), st.floats(0, 1e6))
def test_mass_transfer_identity(T, I, V):
    s, p = one_node(T, I, V)
    fT, fI, _ = reaction(s, p)
    kTV = p.k * T * V
    np.testing.assert_allclose(fI + p.mu_I * I, kTV, rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(fT - (10.0 - p.mu_T * T), -kTV, rtol=1e-12, atol=1e-9)
    # f_T + f_I is free of k
    _, p2 = one_node(T, I, V, k=3 * p.k)
    a, b = reaction(s, p2)[:2]
    np.testing.assert_allclose(a + b, fT + fI, rtol=1e-13, atol=1e-9)


def test_reaction_linear_in_lambda_and_k(rng):
    g = build_grid(1, [1.0], [20], "neumann")
    s = State(g, *rng.uniform(0, 100, (3, 20)))
    p1 = make_params(g, lam=lambda_builder("tabulated", g, values=rng.uniform(0, 5, 20)))
    p2 = make_params(g, lam=lambda_builder("tabulated", g, values=rng.uniform(0, 5, 20)))
    r1, r2 = reaction(s, p1), reaction(s, p2)
    np.testing.assert_allclose(r1[0] - r2[0], p1.lam.values - p2.lam.values, atol=1e-12)
    np.testing.assert_array_equal(r1[1], r2[1])
    # purity
    for a, b in zip(r1, reaction(s, p1)):
        np.testing.assert_array_equal(a, b)
    # doubling k doubles the bilinear part
    r3 = reaction(s, p1.replace(k=2 * p1.k))
    bil = p1.k * s.T * s.V
    np.testing.assert_allclose(r3[0] - r1[0], -bil, rtol=1e-10, atol=1e-12)
    np.testing.assert_allclose(r3[1] - r1[1], bil, rtol=1e-10, atol=1e-12)
    np.testing.assert_array_equal(r3[2], r1[2])


def test_reaction_backends_agree(rng):
    T, I, V, lam = rng.uniform(0, 50, (4, 40))
    out = [mod.reaction(lam, T, I, V, 1e-3, 20.0, 0.1, 0.5, 3.0)
           for mod in kernels.available_backends().values()]
    for other in out[1:]:
        for a, b in zip(out[0], other):
            np.testing.assert_allclose(a, b, rtol=1e-14)


def test_validate(grid1d):
    p = make_params(grid1d)
    assert validate(p) == []
    zero = make_params(grid1d, lam=0.0)
    assert "lambda identically zero" in validate(zero)
    assert any("mu_T" in msg for msg in validate(p.replace(mu_T=-1.0)))
    init = State(grid1d, np.r_[0.0, np.ones(31)], 1.0, 1.0)
    assert any("T0" in msg and "(A1)" in msg for msg in validate(p, init))


def test_initial_data_checks(grid1d):
    p = make_params(grid1d)
    with pytest.warns(UserWarning):
        check_initial_data(p, State(grid1d, 1.0, 0.0, 0.0))
    with pytest.raises(ValueError):
        check_initial_data(p, State(grid1d, 1.0, -1.0, 0.0))


def test_lambda_families():
    g = build_grid(1, [1.0], [21], "neumann")
    np.testing.assert_array_equal(lambda_builder("constant", g, value=10).values, 10.0)
    c = g.coordinates[0][10]
    gau = lambda_builder("gaussian", g, center=[c], width=0.1, amplitude=5.0)
    assert gau.values[10] == pytest.approx(5.0)
    step = lambda_builder("step", g, levels=(0, 2))
    assert step.values.min() == 0 and step.values.max() == 2
    assert validate(make_params(g, lam=step)) == []
    g2 = build_grid(2, [1.0, 1.0], [9, 9], "dirichlet")
    bumps = lambda_builder("bumps", g2, bumps=[{"center": [0.3, 0.3], "width": 0.1, "amplitude": 1},
                                              {"center": [0.7, 0.6], "width": 0.2, "amplitude": 2}])
    assert bumps.values.min() >= 0
    with pytest.raises(ValueError, match="unknown lambda family 'spiral'"):
        lambda_builder("spiral", g)
    with pytest.raises(ValueError):
        lambda_builder("tabulated", g, values=[1.0, 2.0])
    with pytest.raises(ValueError):
        lambda_builder("constant", g, value=-1.0)


def test_state_broadcast_and_grid_checks(grid1d):
    s = State(grid1d, 2.0, 0.0, 1.0)
    assert s.T.shape == (32,) and s.min_value() == 0.0
    with pytest.raises(ValueError):
        State(grid1d, np.ones(5), 0.0, 0.0)
    other = build_grid(1, [1.0], [16], "neumann")
    with pytest.raises(ValueError):
        reaction(State(other, 1.0, 1.0, 1.0), make_params(grid1d))
