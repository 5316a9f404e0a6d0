"""Time stepping for the reaction-diffusion system, with runtime monitors.

Two schemes are provided:

``explicit``
    forward Euler on diffusion and reaction, subject to the diffusive
    CFL limit ``dt <= h_min^2 / (2 dim D_max)``;
``imex_be``
    backward Euler on diffusion, forward Euler on reaction, i.e.
    ``(I - dt D Lap) u_next = u + dt f(u)`` for each species.

Monitors only observe; no scheme clips or otherwise alters the solution.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import StepError
from .mesh import LinearSolver
from .model import Laplacians, Parameters, State, build_laplacians, check_initial_data, reaction

EXPLICIT = "explicit"
IMEX = "imex_be"
SCHEMES = (EXPLICIT, IMEX)
MONITORS = frozenset({"positivity", "sup_bound_T", "gronwall_IV"})

#: Floor below which a nodal value counts as a positivity violation.
POSITIVITY_FLOOR = -1e-12


def default_dt(params: Parameters) -> float:
    return 0.01 * min(1.0 / params.mu_T, 1.0 / params.mu_I, 1.0 / params.mu_V)


def cfl_limit(params: Parameters) -> float:
    g = params.grid
    return min(g.spacing) ** 2 / (2 * g.dim * max(params.D_T, params.D_I, params.D_V))


@dataclass
class StepperConfig:
    t_end: float
    dt: float | None = None
    scheme: str = IMEX
    snapshot_every: int = 1
    monitors: frozenset = MONITORS
    band: float = 1e-6

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        if not self.t_end > 0:
            raise ValueError("t_end must be positive")
        if self.dt is not None and not 0 < self.dt < self.t_end:
            raise ValueError(f"need 0 < dt < t_end, got dt={self.dt}, t_end={self.t_end}")
        if int(self.snapshot_every) < 1:
            raise ValueError("snapshot_every must be a positive integer")
        self.snapshot_every = int(self.snapshot_every)
        unknown = set(self.monitors) - MONITORS
        if unknown:
            raise ValueError(f"unknown monitors {sorted(unknown)}")
        self.monitors = frozenset(self.monitors)

    def resolved_dt(self, params: Parameters) -> float:
        return default_dt(params) if self.dt is None else float(self.dt)

    def step_sizes(self, params: Parameters) -> list[float]:
        """Uniform steps of ``dt``, the last one shortened to land on ``t_end``."""
        dt = self.resolved_dt(params)
        n = max(1, int(round(self.t_end / dt)))
        if abs(n * dt - self.t_end) <= 1e-9 * self.t_end:
            return [dt] * n
        n = int(math.floor(self.t_end / dt))
        return [dt] * n + [self.t_end - n * dt]


def step_explicit(state: State, params: Parameters, laps: Laplacians, dt: float) -> State:
    limit = cfl_limit(params)
    if dt > limit * (1 + 1e-12):
        raise StepError(f"dt={dt:g} exceeds the diffusive CFL limit {limit:g}")
    fT, fI, fV = reaction(state, params)
    new = State(state.grid,
                state.T + dt * (laps.T @ state.T + fT),
                state.I + dt * (laps.I @ state.I + fI),
                state.V + dt * (laps.V @ state.V + fV),
                state.time + dt)
    if not new.is_finite():
        raise StepError(f"non-finite values after explicit step at t={state.time:g}")
    return new


class ImexSystems:
    """Cache of factorised ``I - dt D Lap`` solvers keyed by ``(dt, species)``.

    Species with equal diffusivities share one solver.
    """

    def __init__(self, laps: Laplacians, diffusivities: dict[str, float], tol: float = 1e-10):
        self.laps = laps
        self.diffusivities = diffusivities
        self.tol = tol
        self._cache: dict[tuple[float, float], LinearSolver] = {}

    def solver(self, dt: float, species: str) -> LinearSolver:
        D = self.diffusivities[species]
        key = (dt, D)
        if key not in self._cache:
            lap = getattr(self.laps, species)
            self._cache[key] = LinearSolver(lap.shifted(1.0, scale=-dt), tol=self.tol)
        return self._cache[key]


def _systems_for(params: Parameters, laps: Laplacians) -> ImexSystems:
    return ImexSystems(laps, {"T": params.D_T, "I": params.D_I, "V": params.D_V})


def step_imex(state: State, params: Parameters, laps: Laplacians, dt: float,
              systems: ImexSystems | None = None) -> State:
    if not dt > 0:
        raise StepError("dt must be positive")
    systems = _systems_for(params, laps) if systems is None else systems
    fT, fI, fV = reaction(state, params)
    out = {}
    for name, f in (("T", fT), ("I", fI), ("V", fV)):
        u = getattr(state, name)
        out[name] = systems.solver(dt, name).solve(u + dt * f, x0=u)
    new = State(state.grid, out["T"], out["I"], out["V"], state.time + dt)
    if not new.is_finite():
        raise StepError(f"non-finite values after IMEX step at t={state.time:g}")
    return new


@dataclass
class MonitorRecord:
    step: int
    time: float
    min_T: float
    min_I: float
    min_V: float
    sup_T: float
    sup_I: float
    sup_V: float


@dataclass
class Trajectory:
    snapshots: list[State] = field(default_factory=list)
    snapshot_steps: list[int] = field(default_factory=list)
    monitor_log: list[MonitorRecord] = field(default_factory=list)
    events: list[dict] = field(default_factory=list)
    config: StepperConfig | None = None
    dt: float = 0.0

    @property
    def times(self) -> np.ndarray:
        return np.array([s.time for s in self.snapshots])

    @property
    def final(self) -> State:
        return self.snapshots[-1]

    def min_value(self) -> float:
        """Smallest nodal value of any species over every recorded step."""
        vals = [min(r.min_T, r.min_I, r.min_V) for r in self.monitor_log]
        vals += [s.min_value() for s in self.snapshots[:1]]
        return float(min(vals))

    def sup_series(self, species: str) -> np.ndarray:
        return np.array([np.max(np.abs(getattr(s, species))) for s in self.snapshots])


class SimulationError(StepError):
    """A step failed; ``trajectory`` holds everything computed before it."""

    def __init__(self, message, trajectory):
        super().__init__(message)
        self.trajectory = trajectory


def _record(step: int, s: State) -> MonitorRecord:
    return MonitorRecord(step, s.time, float(s.T.min()), float(s.I.min()), float(s.V.min()),
                         float(np.abs(s.T).max()), float(np.abs(s.I).max()),
                         float(np.abs(s.V).max()))


def gronwall_rate(params: Parameters, T0_sup: float) -> float:
    """Rate ``C`` in ``||I|| + ||V|| <= (||I0|| + ||V0||) exp(C t)``."""
    T_M = T0_sup + params.lambda_sup / params.mu_T
    return max(params.k * T_M, params.N * params.mu_I)


def simulate(init: State, params: Parameters, config: StepperConfig,
             laps: Laplacians | None = None, check: bool = True) -> Trajectory:
    """Advance ``init`` to ``init.time + config.t_end``."""
    if check:
        check_initial_data(params, init)
    laps = build_laplacians(params) if laps is None else laps
    systems = _systems_for(params, laps)
    traj = Trajectory(config=config, dt=config.resolved_dt(params))
    state = init.copy()
    traj.snapshots.append(state)
    traj.snapshot_steps.append(0)

    t0 = init.time
    T0_sup = float(np.abs(init.T).max())
    lam_sup, mu_T = params.lambda_sup, params.mu_T
    phi0 = float(np.abs(init.I).max() + np.abs(init.V).max())
    C = gronwall_rate(params, T0_sup)
    band = config.band
    steps = config.step_sizes(params)
    last = len(steps)
    for n, dt in enumerate(steps, start=1):
        try:
            if config.scheme == EXPLICIT:
                state = step_explicit(state, params, laps, dt)
            else:
                state = step_imex(state, params, laps, dt, systems)
        except Exception as exc:
            raise SimulationError(f"step {n} failed: {exc}", traj) from exc
        rec = _record(n, state)
        traj.monitor_log.append(rec)
        t = state.time - t0
        if "positivity" in config.monitors:
            m = min(rec.min_T, rec.min_I, rec.min_V)
            if m < POSITIVITY_FLOOR:
                traj.events.append({"monitor": "positivity", "step": n, "time": state.time,
                                    "value": m})
        if "sup_bound_T" in config.monitors:
            e = math.exp(-mu_T * t)
            bound = T0_sup * e + lam_sup / mu_T * (1 - e)
            if rec.sup_T > bound * (1 + band):
                traj.events.append({"monitor": "sup_bound_T", "step": n, "time": state.time,
                                    "value": rec.sup_T, "bound": bound})
        if "gronwall_IV" in config.monitors:
            phi = rec.sup_I + rec.sup_V
            # compared in log space: exp(C t) overflows on long runs
            if phi > 0 and (phi0 == 0 or math.log(phi) > math.log(phi0) + C * t + math.log1p(band)):
                traj.events.append({"monitor": "gronwall_IV", "step": n, "time": state.time,
                                    "value": phi, "log_bound": math.log(phi0) + C * t
                                    if phi0 > 0 else -math.inf})
        if n % config.snapshot_every == 0 or n == last:
            traj.snapshots.append(state)
            traj.snapshot_steps.append(n)
    return traj


@dataclass
class MonitorReport:
    violations: list[dict]
    max_excess: float
    min_value: float

    @property
    def passed(self) -> bool:
        return not self.violations


def monitor_bounds(trajectory: Trajectory, params: Parameters, band: float = 1e-6) -> MonitorReport:
    """Check the a priori sup-norm bounds on ``T`` at every snapshot.

    For every snapshot at elapsed time ``t``:

    * ``||T(t)|| <= ||T0|| e^{-mu_T t} + (||lambda||/mu_T)(1 - e^{-mu_T t})``
    * ``||T(t)|| <= T_M = ||T0|| + ||lambda||/mu_T``

    each with tolerance ``band * bound``.  ``max_excess`` is the largest
    relative overshoot seen (negative when every bound holds with room).
    """
    snaps = trajectory.snapshots
    first = snaps[0]
    t0 = first.time
    T0_sup = float(np.abs(first.T).max())
    lam_sup, mu_T = params.lambda_sup, params.mu_T
    T_M = T0_sup + lam_sup / mu_T
    violations = []
    max_excess = -np.inf
    for idx, s in enumerate(snaps):
        e = math.exp(-mu_T * (s.time - t0))
        node = int(np.argmax(np.abs(s.T)))
        value = float(abs(s.T[node]))
        for kind, bound in (("decay_bound_T", T0_sup * e + lam_sup / mu_T * (1 - e)),
                            ("T_M", T_M)):
            excess = (value - bound) / bound if bound > 0 else value
            max_excess = max(max_excess, excess)
            if value > bound * (1 + band):
                violations.append({"kind": kind, "snapshot": idx, "time": s.time,
                                   "node": node, "value": value, "bound": bound})
    min_value = float(min(s.min_value() for s in snaps))
    return MonitorReport(violations, float(max_excess), min_value)
