"""Decay/growth-rate fitting and checks of the asymptotic estimates.

All rates are measured on sup norms.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import RegimeExitError, VirodiffError
from .mesh import Field
from .model import SCALAR_NAMES, Parameters, State
from .spectral import assemble_linearized, classify_stability, principal_eigenvalue
from .steady import solve_T_infinity
from .timestep import StepperConfig, Trajectory, default_dt, monitor_bounds, simulate

log = logging.getLogger(__name__)

EXPERIMENTS = ("classify", "decay", "growth")


@dataclass
class RateFit:
    rate: float
    r_squared: float
    intercept: float
    n_points: int


def fit_decay_rate(times, values, transient_fraction: float = 0.2,
                   min_points: int = 10) -> RateFit:
    """Least-squares slope of ``log(values)`` against ``times``.

    The first ``transient_fraction`` of the samples is discarded.  The rate
    is negative for decay and positive for growth.
    """
    t = np.asarray(times, dtype=float)
    y = np.asarray(values, dtype=float)
    if t.shape != y.shape:
        raise ValueError("times and values differ in length")
    start = int(math.floor(transient_fraction * len(t)))
    t, y = t[start:], y[start:]
    if len(t) < min_points:
        raise ValueError(f"need at least {min_points} points after the transient, got {len(t)}")
    if not np.all(y > 0):
        raise ValueError("series has nonpositive values in the fit window")
    z = np.log(y)
    tm, zm = t.mean(), z.mean()
    stt = np.sum((t - tm) ** 2)
    slope = float(np.sum((t - tm) * (z - zm)) / stt)
    intercept = float(zm - slope * tm)
    ss_res = float(np.sum((z - (intercept + slope * t)) ** 2))
    ss_tot = float(np.sum((z - zm) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else (1.0 if ss_res == 0 else 0.0)
    return RateFit(slope, r2, intercept, len(t))


@dataclass
class TConvergenceReport:
    violations: list[dict]
    upper_violations: list[dict]
    max_relative_excess: float
    band: float
    initial_gap: float

    @property
    def passed(self) -> bool:
        return not self.violations

    @property
    def upper_passed(self) -> bool:
        return not self.upper_violations


def verify_T_convergence(trajectory: Trajectory, T_inf, mu_T: float) -> TConvergenceReport:
    """Check ``||T(t) - T_inf|| <= ||T0 - T_inf|| exp(-mu_T t)`` at every snapshot.

    The tolerance band is ``max(1e-6 g0, 10 dt g0 mu_T)`` with ``g0`` the
    initial gap.  Besides the two-sided sup-norm statement, the one-sided
    bound ``max(T(t) - T_inf) <= g0 exp(-mu_T t)`` is checked separately
    and reported in ``upper_violations``.
    """
    if len(trajectory.snapshots) < 2:
        raise ValueError("need at least two snapshots")
    T_inf = np.asarray(T_inf.values if isinstance(T_inf, Field) else T_inf, dtype=float)
    snaps = trajectory.snapshots
    t0 = snaps[0].time
    gap0 = float(np.max(np.abs(snaps[0].T - T_inf)))
    band = max(1e-6 * gap0, 10.0 * trajectory.dt * gap0 * mu_T)
    violations, upper = [], []
    worst = -np.inf
    for idx, s in enumerate(snaps):
        bound = gap0 * math.exp(-mu_T * (s.time - t0))
        diff = s.T - T_inf
        node = int(np.argmax(np.abs(diff)))
        gap = float(abs(diff[node]))
        if gap0 > 0:
            worst = max(worst, (gap - bound) / gap0)
        elif gap > 0:
            worst = max(worst, np.inf)
        if gap > bound + band:
            violations.append({"snapshot": idx, "time": s.time, "node": node,
                               "gap": gap, "bound": bound, "band": band})
        up = float(diff.max())
        if up > bound + band:
            upper.append({"snapshot": idx, "time": s.time, "node": int(np.argmax(diff)),
                          "excess": up, "bound": bound, "band": band})
    return TConvergenceReport(violations, upper, float(worst if worst > -np.inf else 0.0),
                              band, gap0)


@dataclass
class IVDecay:
    rate: float
    decayed: bool
    r_squared: float
    final_ratio: float


def iv_series(trajectory: Trajectory):
    t = trajectory.times
    phi = trajectory.sup_series("I") + trajectory.sup_series("V")
    return t, phi


def verify_IV_decay(trajectory: Trajectory, transient_fraction: float = 0.2) -> IVDecay:
    """Fit the decay of ``||I|| + ||V||``.

    ``decayed`` holds when the final value is at most ``1e-8`` of the
    initial one, or the fitted rate is negative with ``r^2 > 0.99``.
    """
    t, phi = iv_series(trajectory)
    fit = fit_decay_rate(t, phi, transient_fraction)
    ratio = float(phi[-1] / phi[0])
    decayed = ratio <= 1e-8 or (fit.rate < 0 and fit.r_squared > 0.99)
    return IVDecay(fit.rate, bool(decayed), fit.r_squared, ratio)


@dataclass
class GrowthResult:
    rate: float
    r_squared: float
    eta0: float
    epsilon: float
    t_window: float
    times: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)
    exited_at: float | None = None


def measure_growth_rate(params: Parameters, epsilon: float | None = None,
                        t_window: float | None = None, dt: float | None = None,
                        mode: str = "eigenvector", seed: int = 0,
                        regime_fraction: float = 1e-3, transient_fraction: float = 0.2,
                        min_points: int = 10) -> GrowthResult:
    """Growth rate of a small perturbation of the clearance state.

    Starts from ``(T_inf, eps*phi_I, eps*phi_V)``, where ``phi`` is the
    principal eigenvector (``mode="eigenvector"``) or uniform random noise
    in ``(0, 1]`` (``mode="random"``), and fits the exponential rate of
    ``||I|| + ||V||``.  Samples are kept only while ``||I||`` stays below
    ``regime_fraction * ||T_inf||``.

    Raises
    ------
    RegimeExitError
        Fewer than ``min_points`` samples remain in the linear regime.
    """
    T_inf = solve_T_infinity(params)
    spec = principal_eigenvalue(assemble_linearized(params, T_inf))
    T_sup = float(np.max(T_inf.values))
    eps = 1e-6 * T_sup if epsilon is None else float(epsilon)
    n = params.grid.n_nodes
    if mode == "eigenvector":
        phi_I, phi_V = spec.phi_I, spec.phi_V
    elif mode == "random":
        rng = np.random.default_rng(seed)
        phi_I, phi_V = rng.uniform(1e-3, 1.0, n), rng.uniform(1e-3, 1.0, n)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    threshold = regime_fraction * T_sup
    start_I = eps * float(np.max(phi_I))
    if t_window is None:
        if spec.eta0 > 0 and start_I < threshold:
            t_window = 0.9 * math.log(threshold / start_I) / spec.eta0
        else:
            t_window = 5.0 / max(abs(spec.eta0), 1e-3)
    dt = min(default_dt(params), t_window / 200) if dt is None else dt
    init = State(params.grid, T_inf.values, eps * phi_I, eps * phi_V)
    traj = simulate(init, params, StepperConfig(t_window, dt=dt, snapshot_every=10**9,
                                                monitors=frozenset()), check=False)
    times = np.array([0.0] + [r.time for r in traj.monitor_log])
    sup_I = np.array([start_I] + [r.sup_I for r in traj.monitor_log])
    phi = np.array([start_I + eps * float(np.max(phi_V))]
                   + [r.sup_I + r.sup_V for r in traj.monitor_log])
    outside = np.nonzero(sup_I > threshold)[0]
    exited_at = None
    if outside.size:
        cut = int(outside[0])
        exited_at = float(times[cut])
        times, phi = times[:cut], phi[:cut]
    keep = len(times) - int(math.floor(transient_fraction * len(times)))
    if keep < min_points:
        raise RegimeExitError(
            f"left the linear regime at t={exited_at} with {len(times)} samples; "
            "reduce epsilon")
    fit = fit_decay_rate(times, phi, transient_fraction, min_points)
    return GrowthResult(fit.rate, fit.r_squared, spec.eta0, eps, t_window, times, phi, exited_at)


# -- sweeps ------------------------------------------------------------------

def _default_decay_init(params: Parameters) -> State:
    T_inf = solve_T_infinity(params)
    level = 1e-3 * float(np.max(T_inf.values))
    return State(params.grid, T_inf.values, level, level)


def run_experiment(params: Parameters, experiment: str, options: dict | None = None) -> dict:
    """One sweep row's worth of results for ``params``."""
    options = dict(options or {})
    if experiment == "classify":
        return classify_stability(params, margin=options.get("margin", 1e-6)).as_dict()
    if experiment == "decay":
        init = options.get("init") or _default_decay_init(params)
        config = options.get("config") or StepperConfig(options.get("t_end", 50.0))
        traj = simulate(init, params, config, check=False)
        T_inf = solve_T_infinity(params)
        tc = verify_T_convergence(traj, T_inf, params.mu_T)
        mon = monitor_bounds(traj, params)
        row = {"T_convergence_violations": len(tc.violations),
               "T_upper_violations": len(tc.upper_violations),
               "monitor_violations": len(mon.violations),
               "min_value": traj.min_value()}
        try:
            d = verify_IV_decay(traj, options.get("transient_fraction", 0.2))
            row.update(rate_IV=d.rate, r_squared=d.r_squared, decayed=d.decayed,
                       final_ratio=d.final_ratio)
        except ValueError as exc:
            row.update(rate_IV=None, decayed=None, fit_error=str(exc))
        return row
    if experiment == "growth":
        g = measure_growth_rate(params, epsilon=options.get("epsilon"),
                                t_window=options.get("t_window"))
        return {"eta0": g.eta0, "growth_rate": g.rate, "r_squared": g.r_squared}
    raise ValueError(f"unknown experiment {experiment!r}; expected one of {EXPERIMENTS}")


def _row(job):
    params, axis, value, experiment, options = job
    row = {axis: value}
    try:
        row.update(run_experiment(params.replace(**{axis: value}), experiment, options))
        row["error"] = None
    except (VirodiffError, ValueError, ArithmeticError) as exc:
        log.warning("sweep row %s=%r failed: %s", axis, value, exc)
        row["error"] = f"{type(exc).__name__}: {exc}"
    return row


def sweep(params: Parameters, axis: str, values, experiment: str = "classify",
          options: dict | None = None, workers: int | None = None) -> list[dict]:
    """Run ``experiment`` once per value of the scalar parameter ``axis``.

    Rows come back in the order of ``values``; a failing row carries its
    error message and the sweep continues.
    """
    if axis not in SCALAR_NAMES:
        raise ValueError(f"axis must be one of {SCALAR_NAMES}, got {axis!r}")
    if experiment not in EXPERIMENTS:
        raise ValueError(f"unknown experiment {experiment!r}; expected one of {EXPERIMENTS}")
    jobs = [(params, axis, float(v), experiment, options) for v in values]
    if workers and workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(workers) as pool:
            return list(pool.map(_row, jobs))
    return [_row(j) for j in jobs]
