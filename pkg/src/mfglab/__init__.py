"""Monte Carlo laboratory for Lipschitz solutions of finite-state master
equations with a truncated common-noise variable."""

__version__ = "0.1.0"

from .model import (
    Box,
    ProblemSpec,
    SamplerConfig,
    ValidationReport,
    ModelError,
    affine,
    polynomial,
    builtin_field,
    builtin_catalog,
    validate_problem,
    lipschitz_seminorm,
    load_problem,
)
from .paths import MonteCarloConfig
from .solver import (
    ContinuationConfig,
    GridConfig,
    SolveResult,
    ValueField,
    feynman_kac_apply,
    load_result,
    picard_solve,
    save_result,
)
from .monotone import (
    MonotonicityReport,
    check_alpha_monotone,
    check_alpha_monotone_differential,
    check_g_monotonicity,
    check_hyp_autonomous,
    check_hyp_coupled,
    check_trade_condition,
    check_volatility_condition,
    check_weaker_monotonicity,
    search_matrix_A,
)
from .diagnostics import (
    BetaSchedule,
    BoundCurves,
    ZSample,
    bound_curves,
    grad_norms,
    lambda_beta_star,
    uniqueness_probe,
    z_monitor,
)
from .reference import (
    ToyTrajectory,
    analytic_solution,
    inverse_identity_check,
    toy_blowup_certificate,
    toy_ode_solve,
)

__all__ = [
    "__version__",
    "Box",
    "ProblemSpec",
    "SamplerConfig",
    "ValidationReport",
    "ModelError",
    "affine",
    "polynomial",
    "builtin_field",
    "builtin_catalog",
    "validate_problem",
    "lipschitz_seminorm",
    "load_problem",
    "MonteCarloConfig",
    "ContinuationConfig",
    "GridConfig",
    "SolveResult",
    "ValueField",
    "feynman_kac_apply",
    "picard_solve",
    "save_result",
    "load_result",
    "MonotonicityReport",
    "check_alpha_monotone",
    "check_alpha_monotone_differential",
    "check_g_monotonicity",
    "check_hyp_autonomous",
    "check_hyp_coupled",
    "check_trade_condition",
    "check_volatility_condition",
    "check_weaker_monotonicity",
    "search_matrix_A",
    "BetaSchedule",
    "BoundCurves",
    "ZSample",
    "bound_curves",
    "grad_norms",
    "lambda_beta_star",
    "uniqueness_probe",
    "z_monitor",
    "ToyTrajectory",
    "analytic_solution",
    "inverse_identity_check",
    "toy_blowup_certificate",
    "toy_ode_solve",
]
