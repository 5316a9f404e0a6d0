"""Uninfected steady state and Newton search for full-system equilibria."""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import ConvergenceError, SingularSystemError
from .mesh import Field, Grid, LinearSolver
from .model import Laplacians, Parameters, State, build_laplacians, reaction

log = logging.getLogger(__name__)


def solve_T_infinity(params: Parameters, grid: Grid | None = None,
                     tol: float = 1e-12) -> Field:
    """Solve ``(mu_T - D_T Laplacian) T_inf = lambda``.

    The local equilibrium ``lambda / mu_T`` is used as the starting guess,
    which is already exact for constant supply under Neumann conditions.
    """
    grid = params.grid if grid is None else grid
    if grid != params.grid:
        raise ValueError("grid differs from the grid of lambda")
    lap = build_laplacians(params).T
    A = lap.shifted(params.mu_T, scale=-1.0)
    lam = params.lam.values
    x = LinearSolver(A, tol=tol).solve(lam, x0=lam / params.mu_T)
    return Field(grid, x)


def clearance_state(params: Parameters, T_inf: Field | None = None) -> State:
    if T_inf is None:
        T_inf = solve_T_infinity(params)
    z = np.zeros(params.grid.n_nodes)
    return State(params.grid, T_inf.values, z, z)


def _residual_vector(state: State, params: Parameters, ops: Laplacians) -> np.ndarray:
    fT, fI, fV = reaction(state, params)
    return np.concatenate([ops.T @ state.T + fT,
                           ops.I @ state.I + fI,
                           ops.V @ state.V + fV])


def steady_residual(state: State, params: Parameters, ops: Laplacians | None = None) -> float:
    """Euclidean norm of the stacked residual of the three elliptic equations."""
    ops = build_laplacians(params) if ops is None else ops
    return float(np.linalg.norm(_residual_vector(state, params, ops)))


def steady_jacobian(state: State, params: Parameters, ops: Laplacians) -> sp.csc_matrix:
    T, V = state.T, state.V
    k = params.k
    d = sp.diags
    n = len(T)
    Z = sp.csr_matrix((n, n))
    J = sp.bmat([
        [ops.T.matrix - d(params.mu_T + k * V), Z, d(-k * T)],
        [d(k * V), ops.I.matrix - params.mu_I * sp.identity(n), d(k * T)],
        [Z, params.N * params.mu_I * sp.identity(n), ops.V.matrix - params.mu_V * sp.identity(n)],
    ])
    return sp.csc_matrix(J)


@dataclass
class NewtonResult:
    state: State
    residual: float
    iterations: int
    nonnegative: bool
    history: list[float]

    @property
    def infected(self) -> bool:
        """``I`` is nonzero relative to the size of ``T``."""
        scale = max(float(np.max(np.abs(self.state.T))), 1.0)
        return bool(np.max(np.abs(self.state.I)) > 1e-6 * scale)


def newton_steady(initial: State, params: Parameters, tol: float = 1e-9,
                  max_iter: int = 100, ops: Laplacians | None = None,
                  nonneg_atol: float = 1e-9) -> NewtonResult:
    """Damped Newton iteration for the full steady-state system.

    Raises
    ------
    SingularSystemError
        The Jacobian could not be factorised.
    ConvergenceError
        Residual grew over five consecutive steps, or ``max_iter`` reached.
    """
    if initial.grid != params.grid:
        raise ValueError("initial state is on a different grid")
    ops = build_laplacians(params) if ops is None else ops
    n = params.grid.n_nodes
    u = initial.stacked().copy()

    def split(vec):
        return State(params.grid, vec[:n], vec[n:2 * n], vec[2 * n:])

    F = _residual_vector(split(u), params, ops)
    res = float(np.linalg.norm(F))
    history = [res]
    growth = 0
    it = 0
    while res > tol:
        if it >= max_iter:
            raise ConvergenceError(f"Newton hit max_iter={max_iter} (residual {res:.3e})",
                                   residual=res, iterations=it)
        try:
            lu = spla.splu(steady_jacobian(split(u), params, ops))
        except RuntimeError as exc:
            raise SingularSystemError(f"singular Jacobian at iteration {it}: {exc}") from exc
        step = lu.solve(-F)
        if not np.all(np.isfinite(step)):
            raise SingularSystemError(f"non-finite Newton step at iteration {it}")
        alpha = 1.0
        for _ in range(30):
            trial = u + alpha * step
            F_trial = _residual_vector(split(trial), params, ops)
            r_trial = float(np.linalg.norm(F_trial))
            if np.isfinite(r_trial) and r_trial < res:
                break
            alpha *= 0.5
        growth = growth + 1 if r_trial >= res else 0
        u, F, res = trial, F_trial, r_trial
        it += 1
        history.append(res)
        if growth >= 5 or not np.isfinite(res):
            raise ConvergenceError(f"Newton diverging (residual {res:.3e})",
                                   residual=res, iterations=it)
    final = split(u)
    return NewtonResult(final, res, it, bool(final.min_value() >= -nonneg_atol), history)


@dataclass
class StartOutcome:
    seed_index: int
    result: NewtonResult | None
    error: str | None


def multi_start_steady(params: Parameters, n_starts: int = 20, seed: int = 0,
                       tol: float = 1e-9, max_iter: int = 100,
                       workers: int | None = None) -> list[StartOutcome]:
    """Run Newton from ``n_starts`` random strictly positive states.

    Each start is a random level per species times a mild nodal
    modulation (factor in ``[0.9, 1.1]``); rough nodewise noise sends Newton
    to spurious sign-changing roots far more often.  Levels are drawn on the
    scales set by the kinetics: ``T`` up to twice ``||lambda||/mu_T``, ``I``
    up to ``||lambda||/mu_I`` and ``V`` up to ``N mu_I`` times that over
    ``mu_V``.
    """
    rng = np.random.default_rng(seed)
    n = params.grid.n_nodes
    T_scale = 2.0 * params.lambda_sup / params.mu_T
    I_scale = params.lambda_sup / params.mu_I
    V_scale = params.N * params.mu_I * I_scale / params.mu_V

    def draw(scale):
        return rng.uniform(0.01, 1.0) * scale * rng.uniform(0.9, 1.1, n)

    starts = [State(params.grid, draw(T_scale), draw(I_scale), draw(V_scale))
              for _ in range(n_starts)]
    ops = build_laplacians(params)

    def run(i):
        try:
            return StartOutcome(i, newton_steady(starts[i], params, tol, max_iter, ops), None)
        except (ConvergenceError, SingularSystemError) as exc:
            log.debug("start %d failed: %s", i, exc)
            return StartOutcome(i, None, str(exc))

    if workers and workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            return list(pool.map(run, range(n_starts)))
    return [run(i) for i in range(n_starts)]
