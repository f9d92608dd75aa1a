"""Mixture Weibull proportional-hazards models with cluster frailty, fitted by Monte Carlo EM."""
from .analysis import (
    ComparisonReport,
    CurveTable,
    bic,
    compare_models,
    likelihood_ratio_test,
    survival_curves,
    wald_table,
    wald_tests,
)
from .data import (
    Dataset,
    GameCluster,
    IntervalObservation,
    Violation,
    load_event_csv,
    make_cluster,
    scan_event_csv,
    validate,
    write_event_csv,
)
from .errors import (
    DataError,
    DomainError,
    InformationError,
    OptimizationError,
    SamplerError,
)
from .frailty import (
    sample_gamma_posterior,
    sample_lognormal_posterior,
    sample_posterior,
    suff_stats,
)
from .hazards import hazard1, hazard2, mixture_prob, survival1, survival2, weibull_mean
from .latent import DrawSet, LatentDraw
from .likelihood import complete_loglik, independence_loglik, marginal_gamma_loglik
from .mcem import (
    FitResult,
    MCEMConfig,
    eta_probability,
    louis_information,
    m_step,
    mce_step_gamma,
    mce_step_general,
    run_mcem,
    standard_errors,
)
from .params import (
    FrailtySpec,
    MixtureParams,
    ModelParams,
    Type1Params,
    Type2Params,
    csl_2019_params,
)
from .simulate import SimConfig, simulate_dataset

__all__ = [name for name in dir() if not name.startswith("_")]
