"""Sample-based KL divergence estimation and covariate distribution models.

The package provides nearest-neighbour KL divergence estimators for
continuous data, a chain-rule extension to mixed discrete/continuous data,
subsampling confidence intervals and convergence-rate diagnostics, plus a
small family of covariate distribution models (multivariate Gaussian,
independence copula, Gaussian copula) used to evaluate simulated covariates
against held-out data.
"""

from .data import (
    ColumnSchema,
    Dataset,
    complete_fraction,
    datasets_equal,
    dedup_rows,
    from_continuous,
    inject_mcar,
    load_csv,
    make_dataset,
    schema_from_json,
    split_half,
    take_rows,
    write_csv,
)
from .errors import (
    ConfigError,
    DataError,
    DivergenceInfiniteError,
    DuplicatePointsError,
    EstimationError,
    KldivError,
    ModelError,
    StratumError,
    SubsamplingError,
)
from .kld import (
    KlEstimate,
    NeighborStats,
    compute_neighbor_stats,
    digamma,
    kld_est_bc,
    kld_est_nn,
    kld_gaussian_analytic,
)
from .mixed import Stratification, kld_est_discrete, kld_est_mixed, stratify
from .models import (
    FittedModel,
    GaussCop,
    GaussDist,
    IndepCop,
    MarginModel,
    MODEL_KINDS,
    fit_covariate_model,
    fit_gauss_cop,
    fit_gauss_dist,
    fit_indep_cop,
    fit_margin,
    fit_margins,
    load_model,
    margin_cdf,
    margin_quantile,
    marginalize_columns,
    sample_model,
    save_model,
    to_uniform,
)
from .uq import (
    SubsampleDistribution,
    SubsamplingConfig,
    ci_from_distribution,
    estimate_convergence_rate,
    subsample_ci,
    subsample_distribution,
)
from .harness import (
    BenchmarkCase,
    ExperimentConfig,
    ModelSpec,
    ResultRow,
    config_from_json,
    derive_seed,
    load_config,
    run_experiment,
)

__version__ = "0.1.0"

__all__ = [
    "BenchmarkCase",
    "ColumnSchema",
    "ConfigError",
    "DataError",
    "Dataset",
    "DivergenceInfiniteError",
    "DuplicatePointsError",
    "EstimationError",
    "ExperimentConfig",
    "FittedModel",
    "GaussCop",
    "GaussDist",
    "IndepCop",
    "KlEstimate",
    "KldivError",
    "MODEL_KINDS",
    "MarginModel",
    "ModelError",
    "ModelSpec",
    "NeighborStats",
    "ResultRow",
    "Stratification",
    "StratumError",
    "SubsampleDistribution",
    "SubsamplingConfig",
    "SubsamplingError",
    "ci_from_distribution",
    "complete_fraction",
    "compute_neighbor_stats",
    "config_from_json",
    "datasets_equal",
    "dedup_rows",
    "derive_seed",
    "digamma",
    "estimate_convergence_rate",
    "fit_covariate_model",
    "fit_gauss_cop",
    "fit_gauss_dist",
    "fit_indep_cop",
    "fit_margin",
    "fit_margins",
    "from_continuous",
    "inject_mcar",
    "kld_est_bc",
    "kld_est_discrete",
    "kld_est_mixed",
    "kld_est_nn",
    "kld_gaussian_analytic",
    "load_config",
    "load_csv",
    "load_model",
    "make_dataset",
    "margin_cdf",
    "margin_quantile",
    "marginalize_columns",
    "run_experiment",
    "sample_model",
    "save_model",
    "schema_from_json",
    "split_half",
    "stratify",
    "subsample_ci",
    "subsample_distribution",
    "take_rows",
    "to_uniform",
    "write_csv",
    "__version__",
]
