"""Parsimonious tensor-response regression.

Fits a linear model with a tensor-valued response and vector predictors
under a Kronecker-separable error covariance, either entrywise (OLS) or
through a material/immaterial subspace decomposition per response mode
(the envelope estimators), and produces asymptotic p-value maps.
"""

from .covariance import (
    CovarianceError,
    SeparableCovariance,
    flip_flop_mle,
    log_det,
    matrix_normal_loglik,
    normalize_and_tau,
    sample_matrix_normal,
    whiten_apply,
)
from .estimators import (
    Dataset,
    EnvelopeBasis,
    EnvelopeModel,
    EstimationError,
    FitOptions,
    FitResult,
    center,
    fit_iterative,
    fit_onestep,
    ols_fit,
    parameter_count,
)
from .inference import (
    CoefficientCovariance,
    PValueMap,
    bh_fdr,
    pvalue_map,
    threshold_map,
    u_gamma,
    u_ols,
)
from .simulation import (
    GroundTruth,
    ScenarioConfig,
    ShapeSpec,
    error_metric,
    gen_cp_dataset,
    gen_dataset,
    gen_dataset_3way,
    gen_envelope_covariance,
    make_shape,
    numerical_rank,
    run_replications,
)

__version__ = "0.1.0"
