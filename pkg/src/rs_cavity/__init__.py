"""Asymptotic theory and simulation harness for covariantly penalized
maximum-likelihood estimation in high-dimensional GLMs."""

from .backend import get_backend, set_backend
from .estimator import (
    FitControls,
    FitResult,
    OverlapSample,
    compute_overlaps,
    corrected_nuisance,
    fit_pml,
)
from .harness import ExperimentConfig, compare_report, run_experiment
from .kernels import (
    LOGIT,
    WEIBULL_PH,
    Family,
    GlmKernel,
    NuisanceParams,
    lambert_w0,
    logit_logdensity,
    logit_proximal,
    numeric_proximal,
    sample_logit,
    sample_weibull,
    solve_tanh_fixed_point,
    weibull_H,
    weibull_logdensity,
    weibull_proximal,
)
from .population import (
    PopulationSpec,
    alpha_squared,
    build_population,
    sample_covariates,
    sample_haar_orthogonal,
)
from .quadrature import (
    QuadratureRule,
    RuleKind,
    expect_logit,
    expect_weibull,
    make_logit_rules,
    make_rule,
    make_weibull_rules,
)
from .solver import (
    BracketError,
    ConvergenceError,
    DegenerateRegimeError,
    PenaltyConfig,
    RSSolution,
    RSState,
    SolverControls,
    asymptotic_moments,
    nuisance_debias_factors,
    rs_map_logit,
    rs_map_weibull,
    rs_solve_logit,
    rs_solve_weibull,
    zero_bias_logit,
    zero_bias_weibull,
)

__version__ = "0.1.0"
