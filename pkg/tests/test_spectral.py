import numpy as np
import pytest

from conftest import homogeneous_eta_one, make_params
from virodiff import kernels
from virodiff.mesh import Field, assemble_laplacian, build_grid
from virodiff.spectral import (GLOBAL_BY_COROLLARY, GLOBAL_BY_R0, LOCALLY_STABLE, MARGINAL,
                               UNSTABLE, assemble_linearized, classify, classify_stability,
                               compute_R0_field, principal_eigenvalue)
from virodiff.steady import solve_T_infinity


def dense_eta0(op):
    return np.linalg.eigvals(op.toarray()).real.max()


def random_T_inf_case(rng, n=50, bc="neumann"):
    g = build_grid(1, [1.0], [n], bc)
    p = make_params(g, k=0.3, N=2.0, mu_T=1.0, mu_I=0.7, mu_V=1.3, D_T=0.01, D_I=0.01,
                    D_V=0.02)
    return p, Field(g, rng.uniform(0, 5, n))


def test_degenerate_grid_rejected():
    with pytest.raises(ValueError):
        build_grid(1, [1.0], [1], "neumann")


def test_zero_T_inf_gives_triangular_limit():
    g = build_grid(1, [1.0], [12], "neumann")
    p = make_params(g, mu_I=0.7, mu_V=2.0)
    res = principal_eigenvalue(assemble_linearized(p, Field(g, np.zeros(12))))
    assert res.converged
    assert res.eta0 == pytest.approx(-0.7, abs=1e-8)


def test_blocks_reproduce_reaction_matrix(rng):
    p, T_inf = random_T_inf_case(rng, n=10)
    A = assemble_linearized(p, T_inf).toarray()
    n = 10
    A[:n, :n] -= assemble_laplacian(p.grid, p.D_I).toarray()
    A[n:, n:] -= assemble_laplacian(p.grid, p.D_V).toarray()
    for j in range(n):
        M = A[np.ix_([j, n + j], [j, n + j])]
        np.testing.assert_allclose(M, [[-p.mu_I, p.k * T_inf.values[j]],
                                       [p.N * p.mu_I, -p.mu_V]], rtol=1e-15)


def test_homogeneous_eta_one():
    p = homogeneous_eta_one()
    res = principal_eigenvalue(assemble_linearized(p, solve_T_infinity(p)))
    assert res.converged and res.eta0 == pytest.approx(1.0, abs=1e-8)
    assert res.eigenvector.min() >= -1e-10
    assert np.max(np.abs(res.eigenvector)) == pytest.approx(1.0)
    assert res.residual <= 100 * 1e-10


def test_unit_reproduction_number_is_marginal():
    p = homogeneous_eta_one(k=0.25)  # k T_inf N / mu_V = 1
    rep = classify_stability(p)
    assert rep.R0_sup == pytest.approx(1.0, rel=1e-12)
    assert abs(rep.eta0) <= 1e-8


def test_matches_dense_spectrum(rng):
    for _ in range(5):
        p, T_inf = random_T_inf_case(rng)
        op = assemble_linearized(p, T_inf)
        res = principal_eigenvalue(op)
        assert res.converged
        assert res.eta0 == pytest.approx(dense_eta0(op), abs=1e-8)


def test_shift_invariance(rng):
    p, T_inf = random_T_inf_case(rng, n=30)
    op = assemble_linearized(p, T_inf)
    a = principal_eigenvalue(op)
    b = principal_eigenvalue(op, shift=2 * a.shift)
    assert abs(a.eta0 - b.eta0) <= 1e-9


def test_monotone_in_k():
    g = build_grid(1, [1.0], [16], "neumann")
    base = make_params(g, lam=4.0, k=1.0, N=1.0, mu_T=1.0, mu_I=1.0, mu_V=1.0,
                       D_T=0.1, D_I=0.1, D_V=0.1)
    etas = [classify_stability(base.replace(k=k)).eta0 for k in np.linspace(0.02, 1.0, 10)]
    assert np.all(np.diff(etas) >= -1e-9)


def test_rejects_non_cooperative():
    from virodiff.mesh import SparseOperator
    with pytest.raises(ValueError):
        principal_eigenvalue(SparseOperator(np.array([[0.0, -1.0], [1.0, 0.0]])))


def test_nonconvergence_flagged(rng):
    p, T_inf = random_T_inf_case(rng)
    res = principal_eigenvalue(assemble_linearized(p, T_inf), max_iter=5)
    assert not res.converged and res.iterations == 5


def test_power_iteration_backends_agree(rng):
    p, T_inf = random_T_inf_case(rng, n=20)
    m = assemble_linearized(p, T_inf).matrix
    out = [mod.power_iteration(m.indptr, m.indices, m.data, 5.0, np.ones(40), 1e-10, 50000)
           for mod in kernels.available_backends().values()]
    for o in out[1:]:
        assert o[0] == pytest.approx(out[0][0], abs=1e-9)


def test_R0_field():
    g = build_grid(1, [1.0], [5], "neumann")
    p = make_params(g, N=1000.0, k=1e-5, mu_V=10.0)
    np.testing.assert_allclose(compute_R0_field(Field(g, np.full(5, 100.0)), p).values, 0.1)
    np.testing.assert_allclose(compute_R0_field(Field(g, np.zeros(5)), p).values, 0.0)
    T_inf = solve_T_infinity(p)
    expected = p.lambda_sup * p.k * p.N / (p.mu_T * p.mu_V)
    np.testing.assert_allclose(compute_R0_field(T_inf, p).values, expected, rtol=1e-12)


@pytest.mark.parametrize("eta0,R0,cb,expected", [
    (-0.3, 0.8, 0.9, GLOBAL_BY_COROLLARY),
    (-0.3, 0.8, 1.2, GLOBAL_BY_R0),
    (1.0, 4.0, 4.0, UNSTABLE),
    (-0.1, 1.2, 1.5, LOCALLY_STABLE),
    (1e-9, 1.0, 1.0, MARGINAL),
])
def test_decision_table(eta0, R0, cb, expected):
    assert classify(eta0, R0, cb) == expected


def test_homogeneous_sign_law():
    g = build_grid(1, [1.0], [16], "neumann")
    base = make_params(g, lam=4.0, k=1.0, N=1.0, mu_T=1.0, mu_I=1.0, mu_V=1.0,
                       D_T=0.1, D_I=0.1, D_V=0.1)
    for k in (0.05, 0.2, 0.24, 0.26, 0.8):
        rep = classify_stability(base.replace(k=k))
        assert np.sign(rep.eta0) == np.sign(rep.R0_sup - 1)
