"""Loss-rank model selection for y-linear regressors.

Score a regressor by the log-volume of fictitious responses it would fit
at least as well as the observed one, select complexity by minimising
that score, and benchmark the rule against AIC, BIC, corrected AIC and
generalised cross validation.
"""

__version__ = "0.1.0"

from . import exceptions
from .criteria import (
    aic,
    bayes_regressor_matrix,
    bic,
    bms_neg_log_evidence,
    corrected_aic,
    deff_htf,
    deff_mckay,
    gcv,
    restricted_power_trace,
    taylor_logdet,
)
from .experiments import (
    CellResult,
    ExperimentConfig,
    epe_knn,
    epe_linear,
    gen_shibata,
    gen_table1,
    run_cell,
    run_figure1,
    run_table1,
    run_table2,
    shibata_features,
)
from .gridknn import (
    GridSpec,
    c1_exact,
    c1_limit,
    c1_limit_k,
    c_d_taylor,
    c_infinite_dim,
    circulant_eigs,
    grid_knn_dense,
    taylor_A,
    torus_constant,
    torus_knn_dense,
    torus_logdet,
)
from .linalg import Spectrum, log_det_psd, solve_spd, sym_eig
from .lossrank import (
    LossRankScore,
    ProjectiveScore,
    binary_entropy,
    caic_score,
    discrete_rank_oracle,
    grid_volume_oracle,
    kl_bernoulli,
    loss_rank,
    loss_rank_fixed_alpha,
    optimize_alpha,
    projective_loss_rank,
    residual_spectrum,
    rho_norm_loss_rank,
    subset_design,
    unit_ball_log_volume,
    variable_selection_score,
)
from .regressors import (
    Dataset,
    RegressorMatrix,
    basis_projection_matrix,
    canonical_predict,
    kernel_matrix,
    kernel_predict,
    knn_matrix,
    knn_predict,
    knn_prime_matrix,
    natural_spline_basis,
    natural_spline_penalty,
    polynomial_features,
    spline_matrix,
)
from .selection import LossRankRegressor

__all__ = [
    "CellResult",
    "Dataset",
    "ExperimentConfig",
    "GridSpec",
    "LossRankRegressor",
    "LossRankScore",
    "ProjectiveScore",
    "RegressorMatrix",
    "Spectrum",
    "aic",
    "bayes_regressor_matrix",
    "basis_projection_matrix",
    "bic",
    "binary_entropy",
    "bms_neg_log_evidence",
    "c1_exact",
    "c1_limit",
    "c1_limit_k",
    "c_d_taylor",
    "c_infinite_dim",
    "caic_score",
    "canonical_predict",
    "circulant_eigs",
    "corrected_aic",
    "deff_htf",
    "deff_mckay",
    "discrete_rank_oracle",
    "epe_knn",
    "epe_linear",
    "exceptions",
    "gcv",
    "gen_shibata",
    "gen_table1",
    "grid_knn_dense",
    "grid_volume_oracle",
    "kernel_matrix",
    "kernel_predict",
    "kl_bernoulli",
    "knn_matrix",
    "knn_predict",
    "knn_prime_matrix",
    "log_det_psd",
    "loss_rank",
    "loss_rank_fixed_alpha",
    "natural_spline_basis",
    "natural_spline_penalty",
    "optimize_alpha",
    "polynomial_features",
    "projective_loss_rank",
    "residual_spectrum",
    "restricted_power_trace",
    "rho_norm_loss_rank",
    "run_cell",
    "run_figure1",
    "run_table1",
    "run_table2",
    "shibata_features",
    "solve_spd",
    "spline_matrix",
    "subset_design",
    "sym_eig",
    "taylor_A",
    "taylor_logdet",
    "torus_constant",
    "torus_knn_dense",
    "torus_logdet",
    "unit_ball_log_volume",
    "variable_selection_score",
]
