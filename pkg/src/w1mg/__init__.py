"""Wasserstein-1 distances on square grids by primal-dual and cascadic multilevel solvers."""

from .grid import (
    FluxField,
    GridMismatchError,
    GridSpec,
    ScalarField,
    SourceField,
    adjoint,
    divergence,
    dual_value,
    inner_h,
    norm_L2,
    primal_value,
)
from .multilevel import (
    LevelSchedule,
    default_levels,
    default_tolerance,
    interpolate_flux,
    interpolate_scalar,
    make_schedule,
    ml_run,
)
from .poisson import CompatibilityError, neumann_poisson_solve, project_affine
from .prox import PNorm, project_l1_ball, project_qball, shrink
from .report import LevelReport, SolveReport
from .solver_cp import SolverParams, cp_run
from .solver_pdhg import pdhg_run, recover_potential

__version__ = "0.1.0"

__all__ = [
    "CompatibilityError",
    "FluxField",
    "GridMismatchError",
    "GridSpec",
    "LevelReport",
    "LevelSchedule",
    "PNorm",
    "ScalarField",
    "SolveReport",
    "SolverParams",
    "SourceField",
    "adjoint",
    "cp_run",
    "default_levels",
    "default_tolerance",
    "divergence",
    "dual_value",
    "inner_h",
    "interpolate_flux",
    "interpolate_scalar",
    "make_schedule",
    "ml_run",
    "neumann_poisson_solve",
    "norm_L2",
    "pdhg_run",
    "primal_value",
    "project_affine",
    "project_l1_ball",
    "project_qball",
    "recover_potential",
    "shrink",
]
