"""Uniform Cartesian grids, nodal fields, sparse operators and linear solves.

Node layout
-----------
Dirichlet grids hold interior unknowns only; the boundary values are
identically zero and the spacing is ``length / (n + 1)``.  Neumann grids
are cell-centred with spacing ``length / n`` so that mirror ghost nodes
give a symmetric operator with exact zero row sums.

Nodes are ordered lexicographically with the first axis fastest.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from . import kernels
from .errors import ConvergenceError, SingularSystemError

DIRICHLET = "dirichlet"
NEUMANN = "neumann"
BOUNDARY_TAGS = (DIRICHLET, NEUMANN)

#: Systems at or below this size are solved by dense LU.
DENSE_LIMIT = 400


@dataclass(frozen=True)
class Grid:
    dim: int
    lengths: tuple[float, ...]
    nodes_per_axis: tuple[int, ...]
    bc: str

    @property
    def spacing(self) -> tuple[float, ...]:
        if self.bc == DIRICHLET:
            return tuple(L / (n + 1) for L, n in zip(self.lengths, self.nodes_per_axis))
        return tuple(L / n for L, n in zip(self.lengths, self.nodes_per_axis))

    @property
    def n_nodes(self) -> int:
        return int(np.prod(self.nodes_per_axis))

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    def axis_coordinates(self, axis: int) -> np.ndarray:
        n = self.nodes_per_axis[axis]
        h = self.spacing[axis]
        offset = 1.0 if self.bc == DIRICHLET else 0.5
        return (np.arange(n) + offset) * h

    @cached_property
    def coordinates(self) -> tuple[np.ndarray, ...]:
        """Flattened nodal coordinates, one array per axis."""
        axes = [self.axis_coordinates(a) for a in range(self.dim)]
        if self.dim == 1:
            return (axes[0],)
        X, Y = np.meshgrid(axes[0], axes[1], indexing="xy")
        return (X.ravel(), Y.ravel())

    def reshape(self, values) -> np.ndarray:
        """View nodal values as an array indexed ``[y, x]`` (2D) or ``[x]``."""
        return np.asarray(values).reshape(tuple(reversed(self.nodes_per_axis)))


def build_grid(dim, lengths, nodes_per_axis, bc) -> Grid:
    if dim not in (1, 2):
        raise ValueError(f"dim must be 1 or 2, got {dim!r}")
    lengths = tuple(float(L) for L in np.atleast_1d(lengths))
    nodes = tuple(int(n) for n in np.atleast_1d(nodes_per_axis))
    if len(lengths) != dim or len(nodes) != dim:
        raise ValueError(f"need {dim} lengths and node counts, got {lengths} and {nodes}")
    if any(not np.isfinite(L) or L <= 0 for L in lengths):
        raise ValueError(f"lengths must be positive, got {lengths}")
    if any(n < 3 for n in nodes):
        raise ValueError(f"nodes_per_axis must be >= 3, got {nodes}")
    bc = str(bc).lower()
    if bc not in BOUNDARY_TAGS:
        raise ValueError(f"bc must be one of {BOUNDARY_TAGS}, got {bc!r}")
    return Grid(dim, lengths, nodes, bc)


@dataclass(frozen=True, eq=False)
class Field:
    """Nodal values on a grid."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float, copy=True).ravel()
        if v.shape[0] != self.grid.n_nodes:
            raise ValueError(
                f"field has {v.shape[0]} values, grid has {self.grid.n_nodes} nodes")
        if not np.all(np.isfinite(v)):
            raise ValueError("field contains non-finite values")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)

    def __len__(self):
        return self.values.shape[0]


def _as_vector(f) -> np.ndarray:
    if isinstance(f, Field):
        return f.values
    return np.asarray(f, dtype=float)


class SparseOperator:
    """Square sparse matrix held in CSR form.

    The coordinate-list view is available through :meth:`entries`; it never
    contains explicit zeros or duplicate positions.
    """

    def __init__(self, matrix):
        m = sp.csr_matrix(matrix, dtype=float)
        m.sum_duplicates()
        m.eliminate_zeros()
        m.sort_indices()
        m.indptr = m.indptr.astype(np.int32)
        m.indices = m.indices.astype(np.int32)
        self.matrix = m

    @property
    def rows(self) -> int:
        return self.matrix.shape[0]

    @property
    def cols(self) -> int:
        return self.matrix.shape[1]

    @property
    def shape(self):
        return self.matrix.shape

    def entries(self) -> list[tuple[int, int, float]]:
        coo = self.matrix.tocoo()
        return [(int(i), int(j), float(v)) for i, j, v in zip(coo.row, coo.col, coo.data)]

    def diagonal(self) -> np.ndarray:
        return self.matrix.diagonal()

    def toarray(self) -> np.ndarray:
        return self.matrix.toarray()

    def __matmul__(self, other):
        return apply(self, other)

    def __add__(self, other):
        if isinstance(other, SparseOperator):
            other = other.matrix
        return SparseOperator(self.matrix + other)

    def __sub__(self, other):
        if isinstance(other, SparseOperator):
            other = other.matrix
        return SparseOperator(self.matrix - other)

    def __rmul__(self, scalar):
        return SparseOperator(float(scalar) * self.matrix)

    def shifted(self, c: float, scale: float = 1.0) -> "SparseOperator":
        """Return ``c*I + scale*self``."""
        return SparseOperator(c * sp.identity(self.rows, format="csr") + scale * self.matrix)

    def __repr__(self):
        return f"SparseOperator({self.rows}x{self.cols}, nnz={self.matrix.nnz})"


def identity(n: int) -> SparseOperator:
    return SparseOperator(sp.identity(n, format="csr"))


def _laplacian_1d(n: int, h: float, bc: str) -> sp.csr_matrix:
    main = -2.0 * np.ones(n)
    if bc == NEUMANN:
        # mirror ghost: u[-1] = u[0], u[n] = u[n-1]
        main[0] = main[-1] = -1.0
    off = np.ones(n - 1)
    return sp.diags([off, main, off], [-1, 0, 1], format="csr") / (h * h)


def assemble_laplacian(grid: Grid, diffusion: float = 1.0) -> SparseOperator:
    """Second-order central-difference ``diffusion * Laplacian`` on ``grid``."""
    if not diffusion > 0:
        raise ValueError(f"diffusion must be positive, got {diffusion}")
    n, h = grid.nodes_per_axis, grid.spacing
    L = _laplacian_1d(n[0], h[0], grid.bc)
    if grid.dim == 2:
        Ly = _laplacian_1d(n[1], h[1], grid.bc)
        # first axis fastest: x-blocks sit on the diagonal
        L = sp.kron(sp.identity(n[1]), L) + sp.kron(Ly, sp.identity(n[0]))
    return SparseOperator(diffusion * L)


def apply(op: SparseOperator, f) -> np.ndarray:
    x = np.ascontiguousarray(_as_vector(f), dtype=float)
    if x.shape != (op.cols,):
        raise ValueError(f"operator is {op.rows}x{op.cols}, vector has shape {x.shape}")
    m = op.matrix
    return kernels.csr_matvec(m.indptr, m.indices, m.data, x)


class LinearSolver:
    """Reusable solver for one fixed matrix.

    Dense LU is factorised once for systems of at most ``DENSE_LIMIT``
    unknowns; larger systems use Jacobi-preconditioned conjugate gradients
    and therefore require a symmetric positive definite matrix.
    """

    def __init__(self, op: SparseOperator, tol: float = 1e-10, max_iter: int | None = None):
        if op.rows != op.cols:
            raise ValueError("operator must be square")
        self.op = op
        self.tol = tol
        self.max_iter = max_iter if max_iter is not None else 10 * op.rows
        self.dense = op.rows <= DENSE_LIMIT
        self.last_iterations = 0
        self.last_residual = 0.0
        if self.dense:
            A = op.toarray()
            with warnings.catch_warnings():
                # an exact zero pivot is reported below as SingularSystemError
                warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
                lu, piv = scipy.linalg.lu_factor(A, check_finite=True)
            d = np.abs(np.diag(lu))
            if d.min() <= np.finfo(float).eps * max(d.max(), 1.0) * op.rows:
                raise SingularSystemError("matrix is numerically singular")
            self._lu = (lu, piv)

    def solve(self, rhs, x0=None) -> np.ndarray:
        b = np.ascontiguousarray(_as_vector(rhs), dtype=float)
        if b.shape != (self.op.rows,):
            raise ValueError(f"rhs has shape {b.shape}, expected ({self.op.rows},)")
        if self.dense:
            # LU with partial pivoting is backward stable; the residual is
            # left to :meth:`relative_residual` so the hot path stays cheap
            self.last_iterations = 1
            return scipy.linalg.lu_solve(self._lu, b, check_finite=False)
        m = self.op.matrix
        x0 = np.zeros_like(b) if x0 is None else np.ascontiguousarray(x0, dtype=float)
        x, it, rel = kernels.pcg(m.indptr, m.indices, m.data, b, x0, self.tol, self.max_iter)
        self.last_iterations, self.last_residual = it, rel
        if not rel <= self.tol:
            raise ConvergenceError(
                f"PCG did not converge in {it} iterations (relative residual {rel:.3e})",
                residual=rel, iterations=it)
        return x


    def relative_residual(self, x, rhs) -> float:
        b = _as_vector(rhs)
        r = float(np.linalg.norm(self.op.matrix @ x - b))
        bn = float(np.linalg.norm(b))
        return r / bn if bn else r


def solve_linear(op: SparseOperator, rhs, tol: float = 1e-10, x0=None,
                 max_iter: int | None = None) -> np.ndarray:
    """Solve ``op @ x = rhs`` to relative residual ``tol``.

    Raises
    ------
    ConvergenceError
        Conjugate gradients stopped at ``max_iter`` (default ten times the
        number of unknowns); the final residual is attached.
    SingularSystemError
        The dense factorisation met a zero pivot or produced non-finite
        values.
    """
    solver = LinearSolver(op, tol=tol, max_iter=max_iter)
    x = solver.solve(rhs, x0=x0)
    if solver.dense:
        if not np.all(np.isfinite(x)):
            raise SingularSystemError("dense solve produced non-finite values")
        solver.last_residual = solver.relative_residual(x, rhs)
    return x


def sup_norm(f) -> float:
    v = _as_vector(f)
    return float(np.max(np.abs(v))) if v.size else 0.0


def l2_norm(f, grid: Grid | None = None) -> float:
    """Discrete L2 norm with quadrature weight equal to the cell volume."""
    if grid is None:
        if not isinstance(f, Field):
            raise TypeError("l2_norm of a bare vector needs the grid")
        grid = f.grid
    v = _as_vector(f)
    return float(np.sqrt(grid.cell_volume * np.dot(v, v)))
