"""Linearisation about the clearance state and its principal eigenvalue.

The (I, V) block of the linearised system is cooperative (nonnegative
off-diagonal entries) but not symmetric, so the principal eigenvalue is
found by power iteration on a shifted, entrywise nonnegative matrix
rather than by a symmetric eigensolver.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import kernels
from .mesh import Field, Grid, SparseOperator, assemble_laplacian
from .model import Parameters
from .steady import solve_T_infinity

GLOBAL_BY_COROLLARY = "globally_stable_by_corollary"
GLOBAL_BY_R0 = "globally_stable_by_R0"
LOCALLY_STABLE = "locally_stable"
UNSTABLE = "unstable"
MARGINAL = "marginal"

DEFAULT_MARGIN = 1e-6


def assemble_linearized(params: Parameters, T_inf: Field, grid: Grid | None = None) -> SparseOperator:
    """Block operator ``diag(D_I Lap, D_V Lap) + M(x)`` acting on stacked ``(I, V)``."""
    grid = params.grid if grid is None else grid
    if T_inf.grid != grid or params.grid != grid:
        raise ValueError("T_inf, parameters and grid must share one grid")
    n = grid.n_nodes
    eye = sp.identity(n, format="csr")
    LI = assemble_laplacian(grid, params.D_I).matrix
    LV = assemble_laplacian(grid, params.D_V).matrix
    A = sp.bmat([
        [LI - params.mu_I * eye, sp.diags(params.k * T_inf.values)],
        [params.N * params.mu_I * eye, LV - params.mu_V * eye],
    ], format="csr")
    return SparseOperator(A)


def default_shift(op: SparseOperator) -> float:
    """``max |diag| + 1``: makes ``op + shift*I`` entrywise nonnegative."""
    return float(np.max(np.abs(op.diagonal()))) + 1.0


@dataclass
class SpectralResult:
    eta0: float
    eigenvector: np.ndarray
    residual: float
    iterations: int
    converged: bool
    shift: float

    @property
    def phi_I(self) -> np.ndarray:
        return self.eigenvector[: len(self.eigenvector) // 2]

    @property
    def phi_V(self) -> np.ndarray:
        return self.eigenvector[len(self.eigenvector) // 2:]


def principal_eigenvalue(op: SparseOperator, tol: float = 1e-10, max_iter: int = 50000,
                         shift: float | None = None, v0=None) -> SpectralResult:
    """Perron eigenvalue of a cooperative operator by shifted power iteration.

    Stops when the eigenvalue estimate changes by less than ``tol`` and the
    residual ``||op v - eta v|| / ||v||`` is below ``100 * tol``.  On
    reaching ``max_iter`` the best estimate is returned with
    ``converged=False``.
    """
    off = op.matrix - sp.diags(op.diagonal())
    if off.nnz and off.data.min() < 0:
        raise ValueError("operator has negative off-diagonal entries (not cooperative)")
    sigma = default_shift(op) if shift is None else float(shift)
    v0 = np.ones(op.rows) if v0 is None else np.ascontiguousarray(v0, dtype=float)
    m = op.matrix
    eta, v, it, res, ok = kernels.power_iteration(
        m.indptr, m.indices, m.data, sigma, v0, tol, max_iter)
    v = np.asarray(v)
    if v.sum() < 0:
        v = -v
    v = v / np.max(np.abs(v))
    return SpectralResult(eta, v, res, it, ok, sigma)


def compute_R0_field(T_inf: Field, params: Parameters) -> Field:
    """Local reproduction number ``N k T_inf / mu_V``."""
    return Field(T_inf.grid, params.N * params.k * T_inf.values / params.mu_V)


def classify(eta0: float, R0_sup: float, corollary_bound: float,
             margin: float = DEFAULT_MARGIN) -> str:
    if corollary_bound < 1:
        return GLOBAL_BY_COROLLARY
    if R0_sup < 1:
        return GLOBAL_BY_R0
    if eta0 < -margin:
        return LOCALLY_STABLE
    if eta0 > margin:
        return UNSTABLE
    return MARGINAL


@dataclass
class StabilityReport:
    eta0: float
    R0_sup: float
    corollary_bound: float
    classification: str
    converged: bool = True
    spectral: SpectralResult | None = field(default=None, repr=False)
    T_inf: Field | None = field(default=None, repr=False)

    def as_dict(self) -> dict:
        return {"eta0": self.eta0, "R0_sup": self.R0_sup,
                "corollary_bound": self.corollary_bound,
                "classification": self.classification,
                "converged": self.converged}


def classify_stability(params: Parameters, grid: Grid | None = None, tol: float = 1e-10,
                       max_iter: int = 50000, margin: float = DEFAULT_MARGIN) -> StabilityReport:
    T_inf = solve_T_infinity(params, grid)
    R0_sup = float(np.max(compute_R0_field(T_inf, params).values))
    spec = principal_eigenvalue(assemble_linearized(params, T_inf, grid), tol, max_iter)
    cb = params.corollary_bound
    return StabilityReport(spec.eta0, R0_sup, cb, classify(spec.eta0, R0_sup, cb, margin),
                           spec.converged, spec, T_inf)
