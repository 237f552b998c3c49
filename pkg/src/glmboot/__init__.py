"""Perturbation bootstrap inference for generalized linear models and the GLM Lasso."""

from .errors import ConfigError, DataError, DomainOverflowError, GlmBootError, NumericalError, SingularMatrixError
from .family import FAMILY_NAMES, LinkFamily, make_family
from .glm import (
    BahadurStats,
    Dataset,
    GlmFit,
    SolverOptions,
    expected_info,
    fit_glm,
    hessian,
    neg_log_lik,
    plugin_stats,
    sandwich,
    score,
    score_covariance,
)
from .inference import (
    ConfidenceInterval,
    CoverageReport,
    ball_diagnostic,
    percentile_ci,
    region_covers,
    reports_from_csv,
    reports_to_csv,
)
from .lasso import (
    LassoFit,
    LassoOptions,
    check_kkt,
    fit_lasso,
    fit_pb_lasso,
    irrepresentable_margin,
    pb_lasso_distribution,
    select_lambda_cv,
)
from .perturb import EXP1, BootstrapDistribution, WeightDist, draw_weights, fit_pb_glm, pb_distribution, pb_score
from .simulate import (
    LambdaMode,
    SimConfig,
    gauss_failure_demo,
    gen_design,
    gen_response,
    run_coverage_sim,
    run_lasso_sim,
    true_beta,
)

__version__ = "0.1.0"
