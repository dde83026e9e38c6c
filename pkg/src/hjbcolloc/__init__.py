"""Wendland-kernel collocation and l1-constrained regression schemes for
fully nonlinear parabolic terminal value problems, with a benchmark harness
and an explicit-Euler finite-difference baseline."""

from .bench import (
    ErrorReport,
    fd_baseline,
    benchmark_problem,
    ratio_table,
    residual_check,
    run_benchmark,
)
from .geometry import (
    CollocationSet,
    TimeGrid,
    equispaced_grid,
    fill_distance,
    scaled_radius,
    sobol_points,
)
from .interp import (
    GramSystem,
    Interpolant,
    assemble,
    convergence_probe,
    diffusion_matrix,
    drift_matrix,
    interpolate,
)
from .kernels import WendlandKernel, build_kernel
from .l1regress import BudgetSchedule, RegressionModel, fit, lmo
from .solver import (
    ControlForm,
    GeneralF,
    HjbProblem,
    eval_solution,
    hjb_step_operator,
    solve_interp,
    solve_regress,
)

__version__ = "0.1.0"

__all__ = [
    "BudgetSchedule", "CollocationSet", "ControlForm", "ErrorReport",
    "GeneralF", "GramSystem", "HjbProblem", "Interpolant", "RegressionModel",
    "TimeGrid", "WendlandKernel", "assemble", "build_kernel",
    "convergence_probe", "diffusion_matrix", "drift_matrix", "equispaced_grid",
    "eval_solution", "fd_baseline", "fill_distance", "fit", "benchmark_problem",
    "hjb_step_operator", "interpolate", "lmo", "scaled_radius", "ratio_table",
    "residual_check", "run_benchmark", "sobol_points", "solve_interp",
    "solve_regress",
]
