"""Reaction-diffusion model of in-host viral dynamics with spatially varying
T-cell supply: simulation, clearance-state stability and decay checks."""

__version__ = "0.1.0"

from .mesh import Field, Grid, SparseOperator, assemble_laplacian, build_grid, l2_norm, solve_linear, sup_norm
from .model import Parameters, State, lambda_builder, reaction, validate
from .spectral import classify_stability, principal_eigenvalue
from .steady import solve_T_infinity
from .timestep import StepperConfig, simulate

__all__ = [
    "Field", "Grid", "SparseOperator", "assemble_laplacian", "build_grid", "l2_norm",
    "solve_linear", "sup_norm", "Parameters", "State", "lambda_builder", "reaction",
    "validate", "classify_stability", "principal_eigenvalue", "solve_T_infinity",
    "StepperConfig", "simulate",
]
