import numpy as np
import pytest

from conftest import homogeneous_eta_one, make_params
from virodiff.analysis import (fit_decay_rate, measure_growth_rate, run_experiment, sweep,
                               verify_IV_decay, verify_T_convergence)
from virodiff.errors import RegimeExitError
from virodiff.mesh import build_grid
from virodiff.model import State
from virodiff.spectral import GLOBAL_BY_COROLLARY, UNSTABLE
from virodiff.steady import solve_T_infinity
from virodiff.timestep import StepperConfig, Trajectory, simulate


def test_fit_exact_exponential():
    t = np.linspace(0, 3, 60)
    fit = fit_decay_rate(t, 5 * np.exp(-2 * t))
    assert fit.rate == pytest.approx(-2, abs=1e-6)
    assert fit.r_squared > 0.999999


def test_fit_constant_and_bad_input():
    t = np.linspace(0, 1, 30)
    fit = fit_decay_rate(t, np.full(30, 7.0))
    assert abs(fit.rate) <= 1e-12 and fit.r_squared == 1.0
    with pytest.raises(ValueError, match="nonpositive"):
        fit_decay_rate(t, np.r_[np.ones(29), 0.0])
    with pytest.raises(ValueError, match="at least"):
        fit_decay_rate(t[:5], np.ones(5))


def test_constant_mode_decays_at_mu_T():
    g = build_grid(1, [1.0], [32], "neumann")
    p = make_params(g)
    T_inf = solve_T_infinity(p).values
    with pytest.warns(UserWarning):
        traj = simulate(State(g, T_inf + 50.0, 0.0, 0.0), p,
                        StepperConfig(40.0, snapshot_every=20))
    gap = [np.max(np.abs(s.T - T_inf)) for s in traj.snapshots]
    assert fit_decay_rate(traj.times, gap).rate == pytest.approx(-p.mu_T, rel=0.02)
    assert verify_T_convergence(traj, T_inf, p.mu_T).passed


def stable_params():
    g = build_grid(1, [1.0], [32], "neumann")
    # N k lambda / (mu_T mu_V) = 0.5
    return make_params(g, k=2.5e-5, N=100.0)


def test_T_convergence_in_clearance_regime():
    p = stable_params()
    T_inf = solve_T_infinity(p).values
    traj = simulate(State(p.grid, 2 * T_inf, 1.0, 10.0), p,
                    StepperConfig(60.0, snapshot_every=50))
    rep = verify_T_convergence(traj, T_inf, p.mu_T)
    assert rep.passed and rep.upper_passed
    assert rep.max_relative_excess <= 0


def test_T_convergence_detector():
    g = build_grid(1, [1.0], [4], "neumann")
    T_inf = np.full(4, 10.0)
    snaps = [State(g, 20.0, 0.0, 0.0, time=0.0), State(g, 20.0, 0.0, 0.0, time=1.0)]
    rep = verify_T_convergence(Trajectory(snapshots=snaps, dt=0.01), T_inf, 1.0)
    assert not rep.passed and not rep.upper_passed
    assert [v["snapshot"] for v in rep.violations] == [1]


def test_IV_decay_stable_and_unstable():
    p = stable_params()
    T_inf = solve_T_infinity(p).values
    traj = simulate(State(p.grid, T_inf, 1.0, 10.0), p, StepperConfig(100.0, snapshot_every=50))
    d = verify_IV_decay(traj)
    assert d.decayed and d.rate < 0 and d.r_squared > 0.99

    q = homogeneous_eta_one()
    T_inf = solve_T_infinity(q).values
    traj = simulate(State(q.grid, T_inf, 1e-6, 1e-6), q, StepperConfig(5.0, snapshot_every=10))
    assert not verify_IV_decay(traj).decayed


def test_IV_decay_exact_clearance_is_degenerate(grid1d):
    p = make_params(grid1d)
    with pytest.warns(UserWarning):
        traj = simulate(State(grid1d, 100.0, 0.0, 0.0), p, StepperConfig(1.0, snapshot_every=1))
    with pytest.raises(ValueError, match="nonpositive"):
        verify_IV_decay(traj)


def test_growth_rate_matches_eta0():
    g = measure_growth_rate(homogeneous_eta_one())
    assert g.eta0 == pytest.approx(1.0, abs=1e-8)
    assert g.rate == pytest.approx(1.0, rel=0.05)


def test_growth_rate_negative_eta0():
    g = measure_growth_rate(homogeneous_eta_one(k=0.0625))
    assert g.eta0 == pytest.approx(-0.5, abs=1e-8)
    assert g.rate < 0


def test_growth_random_perturbation_sign():
    g = measure_growth_rate(homogeneous_eta_one(), mode="random", seed=4)
    assert g.rate > 0


def test_growth_regime_exit():
    with pytest.raises(RegimeExitError):
        measure_growth_rate(homogeneous_eta_one(), epsilon=0.1)


def test_sweep_basics():
    p = homogeneous_eta_one()
    assert sweep(p, "k", []) == []
    row, = sweep(p, "k", [0.5])
    alone = run_experiment(p.replace(k=0.5), "classify")
    assert {k: row[k] for k in alone} == alone
    with pytest.raises(ValueError):
        sweep(p, "lam", [1.0])
    with pytest.raises(ValueError):
        sweep(p, "k", [1.0], experiment="bogus")


def test_sweep_threshold_transition():
    p = homogeneous_eta_one()
    ks = np.linspace(0.05, 0.6, 8)
    rows = sweep(p, "k", ks, workers=2)
    assert [r["k"] for r in rows] == pytest.approx(list(ks))
    labels = [r["classification"] for r in rows]
    first_unstable = labels.index(UNSTABLE)
    assert all(l == GLOBAL_BY_COROLLARY for l in labels[:first_unstable])
    assert all(l == UNSTABLE for l in labels[first_unstable:])
    assert np.all(np.diff([r["eta0"] for r in rows]) > 0)


def test_sweep_row_errors_are_captured():
    p = homogeneous_eta_one()
    rows = sweep(p, "k", [0.5], experiment="growth", options={"epsilon": 0.5})
    assert rows[0]["error"].startswith("RegimeExitError")
