"""initik: inertial iterated Tikhonov solvers for linear ill-posed problems.

The package bundles matrix-free linear operators, per-step Tikhonov inner
solvers, the outer iterations (inertial iterated Tikhonov, iterated
Tikhonov, Nesterov and FISTA baselines) as scikit-learn style estimators,
benchmark problem generators (image deblurring, an inverse potential
problem surrogate, dense test problems) and a diagnostics layer that runs
the methods' structural identities and bounds as numerical checks.
"""

from .diagnostics import (
    CheckReport,
    check_extrapolation_identity,
    check_inertia_summability,
    check_kstar_bound,
    check_residual_monotonicity,
    check_sequence_lemma,
    check_series_plateau,
    check_step_identity,
    merge_reports,
    minimum_norm_solution,
    series_accumulators,
)
from .inner import InnerSolveError, InnerSolveReport, cg_solve, spectral_solve
from .operators import (
    ComposedOperator,
    Convolution2D,
    DenseOperator,
    DiagonalOperator,
    LinearOperator,
    make_convolution,
    operator_norm_estimate,
)
from .problems import (
    PgmParseError,
    Problem,
    assemble_ipp_operator,
    default_ipp_phantom,
    gaussian_psf,
    load_pgm,
    make_deblurring_problem,
    make_dense_problem,
    make_ipp_problem,
    make_phantom_image,
    neumann_trace_fd,
    poisson_solve_fd,
)
from .solvers import (
    METHODS,
    FistaSolver,
    InertialIteratedTikhonov,
    IterationTrace,
    IteratedTikhonov,
    NesterovSolver,
    NonFiniteIterationError,
    discrepancy_reached,
    extrapolate,
    inertial_weight,
    lambda_value,
    normalize_lambda_schedule,
    theta_weight,
    tikhonov_step,
)

__version__ = "0.1.0"

__all__ = [
    "CheckReport",
    "ComposedOperator",
    "Convolution2D",
    "DenseOperator",
    "DiagonalOperator",
    "FistaSolver",
    "InertialIteratedTikhonov",
    "InnerSolveError",
    "InnerSolveReport",
    "IterationTrace",
    "IteratedTikhonov",
    "LinearOperator",
    "METHODS",
    "NesterovSolver",
    "NonFiniteIterationError",
    "PgmParseError",
    "Problem",
    "assemble_ipp_operator",
    "cg_solve",
    "check_extrapolation_identity",
    "check_inertia_summability",
    "check_kstar_bound",
    "check_residual_monotonicity",
    "check_sequence_lemma",
    "check_series_plateau",
    "check_step_identity",
    "default_ipp_phantom",
    "discrepancy_reached",
    "extrapolate",
    "gaussian_psf",
    "inertial_weight",
    "lambda_value",
    "load_pgm",
    "make_convolution",
    "make_deblurring_problem",
    "make_dense_problem",
    "make_ipp_problem",
    "make_phantom_image",
    "merge_reports",
    "minimum_norm_solution",
    "neumann_trace_fd",
    "normalize_lambda_schedule",
    "operator_norm_estimate",
    "poisson_solve_fd",
    "series_accumulators",
    "spectral_solve",
    "theta_weight",
    "tikhonov_step",
]
