"""Dimensionless form of the model.

Time and length are scaled by the T-cell clearance rate and diffusivity,

    t_c = 1/mu_T,  x_c = sqrt(D_T/mu_T),

and the concentrations by

    T_c = mu_V/(k N),  I_c = mu_V mu_T/(k N mu_I),  V_c = mu_T/k,

which leaves

    T_t - Lap T       = q - T - T V
    I_t - beta1 Lap I = alpha1 (T V - I)
    V_t - beta2 Lap V = alpha2 (I - V)

with alpha1 = mu_I/mu_T, alpha2 = mu_V/mu_T, beta1 = D_I/D_T,
beta2 = D_V/D_T and q = k N lambda/(mu_T mu_V).

The T and I equations carry different coefficients on ``T V`` (1 and
alpha1), so the scaled system is not literally an instance of the
dimensional kinetics.  It becomes one after carrying ``J = I/alpha1`` in
place of ``I``: with ``k = 1, N = alpha2, mu_T = 1, mu_I = alpha1,
mu_V = alpha2`` the dimensional kinetics in ``(T, J, V)`` reproduce the
three scaled equations exactly.  :func:`solver_parameters` and
:func:`to_solver_state` / :func:`from_solver_state` implement that map so
the scaled system runs through the same solver.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .mesh import Field, Grid, build_grid
from .model import Parameters, State

TO_DIMENSIONLESS = "to_dimensionless"
TO_DIMENSIONAL = "to_dimensional"


@dataclass(frozen=True)
class ScalingConstants:
    t_c: float
    x_c: float
    T_c: float
    I_c: float
    V_c: float


@dataclass(frozen=True)
class DimensionlessParameters:
    alpha1: float
    alpha2: float
    beta1: float
    beta2: float
    q: Field


def nondimensionalize(params: Parameters) -> tuple[ScalingConstants, DimensionlessParameters]:
    k, N = params.k, params.N
    mT, mI, mV = params.mu_T, params.mu_I, params.mu_V
    sc = ScalingConstants(
        t_c=1.0 / mT,
        x_c=math.sqrt(params.D_T / mT),
        T_c=mV / (k * N),
        I_c=mV * mT / (k * N * mI),
        V_c=mT / k,
    )
    dp = DimensionlessParameters(
        alpha1=mI / mT,
        alpha2=mV / mT,
        beta1=params.D_I / params.D_T,
        beta2=params.D_V / params.D_T,
        q=Field(params.grid, (k * N / (mT * mV)) * params.lam.values),
    )
    return sc, dp


def rescale_grid(grid: Grid, constants: ScalingConstants, direction: str) -> Grid:
    f = _factor(direction)
    return build_grid(grid.dim, [L / constants.x_c ** f for L in grid.lengths],
                      grid.nodes_per_axis, grid.bc)


def _factor(direction: str) -> int:
    if direction == TO_DIMENSIONLESS:
        return 1
    if direction == TO_DIMENSIONAL:
        return -1
    raise ValueError(f"direction must be {TO_DIMENSIONLESS!r} or {TO_DIMENSIONAL!r}")


def rescale_state(state: State, constants: ScalingConstants, direction: str) -> State:
    """Scale concentrations and time; the grid lengths are scaled by ``x_c``.

    Nodal values stay node-indexed, so only the grid metadata changes in
    space.
    """
    f = _factor(direction)
    c = constants
    return State(rescale_grid(state.grid, c, direction),
                 state.T / c.T_c ** f, state.I / c.I_c ** f, state.V / c.V_c ** f,
                 state.time / c.t_c ** f)


def solver_parameters(dp: DimensionlessParameters, grid: Grid | None = None) -> Parameters:
    """Dimensional-form parameters whose kinetics in ``(T, I/alpha1, V)``
    equal the scaled system."""
    grid = dp.q.grid if grid is None else grid
    return Parameters(lam=Field(grid, dp.q.values), k=1.0, N=dp.alpha2, mu_T=1.0,
                      mu_I=dp.alpha1, mu_V=dp.alpha2, D_T=1.0, D_I=dp.beta1, D_V=dp.beta2)


def to_solver_state(state: State, dp: DimensionlessParameters) -> State:
    return State(state.grid, state.T, state.I / dp.alpha1, state.V, state.time)


def from_solver_state(state: State, dp: DimensionlessParameters) -> State:
    return State(state.grid, state.T, state.I * dp.alpha1, state.V, state.time)
