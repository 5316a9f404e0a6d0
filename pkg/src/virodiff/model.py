"""Model parameters, state container and the reaction kinetics.

The local kinetics at every node are

    f_T = lambda - mu_T T - k T V
    f_I = k T V - mu_I I
    f_V = N mu_I I - mu_V V

Units are documented only: T, I in cells per volume, V in virions per
volume, rates per unit time, diffusivities length^2 per time.
"""
from __future__ import annotations

import dataclasses
import warnings
from dataclasses import dataclass

import numpy as np

from . import kernels
from .mesh import Field, Grid, SparseOperator, assemble_laplacian

SCALAR_NAMES = ("k", "N", "mu_T", "mu_I", "mu_V", "D_T", "D_I", "D_V")


@dataclass(frozen=True)
class Parameters:
    lam: Field
    k: float
    N: float
    mu_T: float
    mu_I: float
    mu_V: float
    D_T: float
    D_I: float
    D_V: float

    @property
    def grid(self) -> Grid:
        return self.lam.grid

    def replace(self, **changes) -> "Parameters":
        return dataclasses.replace(self, **changes)

    def scalars(self) -> dict[str, float]:
        return {name: float(getattr(self, name)) for name in SCALAR_NAMES}

    @property
    def lambda_sup(self) -> float:
        return float(np.max(np.abs(self.lam.values)))

    @property
    def corollary_bound(self) -> float:
        """``N k ||lambda||_inf / (mu_T mu_V)``."""
        return self.N * self.k * self.lambda_sup / (self.mu_T * self.mu_V)


@dataclass
class State:
    grid: Grid
    T: np.ndarray
    I: np.ndarray
    V: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        n = self.grid.n_nodes
        for name in ("T", "I", "V"):
            v = np.array(getattr(self, name), dtype=float, copy=True).ravel()
            if v.size == 1:
                v = np.full(n, v[0])
            if v.shape != (n,):
                raise ValueError(f"{name} has {v.size} values, grid has {n} nodes")
            setattr(self, name, v)
        if self.time < 0:
            raise ValueError("time must be nonnegative")

    def copy(self) -> "State":
        return State(self.grid, self.T, self.I, self.V, self.time)

    def stacked(self) -> np.ndarray:
        return np.concatenate([self.T, self.I, self.V])

    def min_value(self) -> float:
        return float(min(self.T.min(), self.I.min(), self.V.min()))

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.T)) and np.all(np.isfinite(self.I))
                    and np.all(np.isfinite(self.V)))


def _check_same_grid(state: State, params: Parameters):
    if state.grid != params.grid:
        raise ValueError("state and parameters live on different grids")


def reaction(state: State, params: Parameters):
    """Nodewise kinetics ``(f_T, f_I, f_V)``."""
    _check_same_grid(state, params)
    return kernels.reaction(
        np.ascontiguousarray(params.lam.values), state.T, state.I, state.V,
        float(params.k), float(params.N), float(params.mu_T),
        float(params.mu_I), float(params.mu_V))


def validate(params: Parameters, init: State | None = None) -> list[str]:
    """List every violated standing assumption; empty means admissible."""
    problems = []
    for name, value in params.scalars().items():
        if not np.isfinite(value) or value <= 0:
            problems.append(f"{name} must be strictly positive (got {value})")
    lam = params.lam.values
    if np.any(lam < 0):
        problems.append(f"lambda must be nonnegative (min {lam.min()})")
    if not lam.max() > 0:
        problems.append("lambda identically zero")
    if init is not None:
        if init.grid != params.grid:
            problems.append("initial state grid differs from parameter grid")
        for name in ("T", "I", "V"):
            values = getattr(init, name)
            if not np.all(np.isfinite(values)):
                problems.append(f"{name}0 has non-finite values")
            elif not values.min() > 0:
                problems.append(
                    f"{name}0 violates strict positivity (A1): min {values.min()}")
    return problems


def check_initial_data(params: Parameters, init: State) -> None:
    """Entry-point check for simulations.

    Strict positivity is the standing assumption, but nonnegative data is
    accepted with a warning.  Anything else raises ``ValueError``.
    """
    problems = validate(params, init)
    hard = [p for p in problems if "(A1)" not in p]
    if hard:
        raise ValueError("; ".join(hard))
    if problems:
        if init.min_value() < 0:
            raise ValueError("; ".join(problems))
        warnings.warn("initial data is nonnegative but not strictly positive: "
                      + "; ".join(problems), stacklevel=3)


# -- supply-rate fields -------------------------------------------------------

def _gaussian(grid: Grid, center, width, amplitude):
    center = np.atleast_1d(np.asarray(center, dtype=float))
    if center.size != grid.dim:
        raise ValueError(f"gaussian center needs {grid.dim} coordinates")
    if not width > 0:
        raise ValueError("gaussian width must be positive")
    if amplitude < 0:
        raise ValueError(f"negative amplitude {amplitude}")
    r2 = sum((x - c) ** 2 for x, c in zip(grid.coordinates, center))
    return amplitude * np.exp(-r2 / (2.0 * width ** 2))


def lambda_builder(family: str, grid: Grid, **kw) -> Field:
    """Build a nonnegative supply-rate field.

    Families
    --------
    ``constant``   value
    ``gaussian``   center, width, amplitude[, base]
    ``bumps``      bumps (list of dicts with center/width/amplitude)[, base]
    ``step``       levels (low, high)[, position, axis]; ``position`` is a
                   fraction of the axis length, nodes at or past it get
                   ``high``
    ``tabulated``  values
    """
    if family == "constant":
        value = float(kw["value"])
        if value < 0:
            raise ValueError(f"negative constant {value}")
        values = np.full(grid.n_nodes, value)
    elif family == "gaussian":
        base = float(kw.get("base", 0.0))
        if base < 0:
            raise ValueError(f"negative base {base}")
        values = base + _gaussian(grid, kw["center"], float(kw["width"]),
                                  float(kw["amplitude"]))
    elif family == "bumps":
        base = float(kw.get("base", 0.0))
        if base < 0:
            raise ValueError(f"negative base {base}")
        values = np.full(grid.n_nodes, base)
        for b in kw["bumps"]:
            values = values + _gaussian(grid, b["center"], float(b["width"]),
                                        float(b["amplitude"]))
    elif family == "step":
        low, high = (float(v) for v in kw["levels"])
        if low < 0 or high < 0:
            raise ValueError(f"negative step level in {(low, high)}")
        axis = int(kw.get("axis", 0))
        cut = float(kw.get("position", 0.5)) * grid.lengths[axis]
        values = np.where(grid.coordinates[axis] >= cut, high, low)
    elif family == "tabulated":
        values = np.asarray(kw["values"], dtype=float).ravel()
        if values.size != grid.n_nodes:
            raise ValueError(
                f"tabulated lambda has {values.size} values, grid has {grid.n_nodes} nodes")
        if np.any(values < 0):
            raise ValueError("tabulated lambda has negative entries")
    else:
        raise ValueError(f"unknown lambda family {family!r}")
    return Field(grid, values)


@dataclass(frozen=True)
class Laplacians:
    """``D * Laplacian`` for each of the three species."""

    T: SparseOperator
    I: SparseOperator
    V: SparseOperator


def build_laplacians(params: Parameters) -> Laplacians:
    g = params.grid
    return Laplacians(assemble_laplacian(g, params.D_T),
                      assemble_laplacian(g, params.D_I),
                      assemble_laplacian(g, params.D_V))
