from .config import Settings, RunConfig
from .logger import setup_logger
from .errors import (
    TweedieLabError,
    DomainError,
    ConfigError,
    NoSupportError,
    QuadratureError,
    RankError,
    InversionError,
)
from .rng import RngStream
from .special_fn import (
    log_bessel_i,
    bessel_ratio,
    erf,
    u_coth,
    sample_noncentral_chi2,
    sample_gamma,
    sample_lognormal,
)
from .process import (
    CoefficientSchedule,
    ConstantSchedule,
    AffineSchedule,
    PowerSchedule,
    ExponentialSchedule,
    ScaledSquareSchedule,
    CallableSchedule,
    Transport,
    Prior,
    ForwardProcess,
    VEProcess,
    VPProcess,
    GBMProcess,
    BESQProcess,
    BESQGeneralProcess,
    CIRProcess,
    CEVProcess,
    BES3Process,
    PROCESS_REGISTRY,
    PRESETS,
    get_available_families,
    process_from_config,
    process_to_config,
    prior_from_config,
    forward_sample,
    transition_density,
    noise_distribution,
)
from .oracle import (
    QuadratureSpec,
    marginal_density_numeric,
    score_numeric,
    conditional_expectation_numeric,
    lookback_drift_mc,
    lookback_identity_rhs,
)
from .tweedie import (
    Integrand,
    DegenerateOracle,
    AnalyticOracle,
    MonteCarloOracle,
    QuadratureOracle,
    ScoreField,
    make_oracle,
    conditional_expectation_mc,
    score_ve,
    score_vp,
    score_gbm,
    score_besq,
    score_besq_general,
    score_cir,
    score_cev,
    score_bes3,
    score_bes3_sigma,
    tweedie_score,
    score_field,
    numeric_score_field,
    stationary_score,
    eps_from_score,
    score_from_eps,
)
from .dsm import (
    DsmSample,
    BasisScoreModel,
    draw_dsm_samples,
    dsm_loss_ve,
    dsm_loss_vp,
    dsm_loss_gbm,
    dsm_loss_cir,
    dsm_loss,
    empirical_dsm_loss,
    fit_basis_score,
    resolve_basis,
)
from .sampler import (
    PositivityGuard,
    ReverseRunConfig,
    SamplerResult,
    reverse_em_general,
    reverse_em_gbm,
    reverse_em_cir,
    reverse_sample,
    summarize_samples,
)
from .empirical_bayes import (
    Histogram,
    SplineScore,
    EBModel,
    build_histogram,
    lindsey_fit,
    eb_besq_estimate,
    eb_gbm_estimate,
    eb_bm_estimate,
    run_eb_experiment,
    compare_gbm_bm,
    efron_prior_grid,
)
from .artifacts import RunManifest, write_csv, write_sidecar, read_csv

__all__ = [
    'Settings', 'RunConfig', 'setup_logger',
    'TweedieLabError', 'DomainError', 'ConfigError', 'NoSupportError',
    'QuadratureError', 'RankError', 'InversionError',
    'RngStream',
    'log_bessel_i', 'bessel_ratio', 'erf', 'u_coth',
    'sample_noncentral_chi2', 'sample_gamma', 'sample_lognormal',
    'CoefficientSchedule', 'ConstantSchedule', 'AffineSchedule', 'PowerSchedule',
    'ExponentialSchedule', 'ScaledSquareSchedule', 'CallableSchedule',
    'Transport', 'Prior', 'ForwardProcess',
    'VEProcess', 'VPProcess', 'GBMProcess', 'BESQProcess', 'BESQGeneralProcess',
    'CIRProcess', 'CEVProcess', 'BES3Process',
    'PROCESS_REGISTRY', 'PRESETS', 'get_available_families',
    'process_from_config', 'process_to_config', 'prior_from_config',
    'forward_sample', 'transition_density', 'noise_distribution',
    'QuadratureSpec', 'marginal_density_numeric', 'score_numeric',
    'conditional_expectation_numeric', 'lookback_drift_mc', 'lookback_identity_rhs',
    'Integrand', 'DegenerateOracle', 'AnalyticOracle', 'MonteCarloOracle', 'QuadratureOracle',
    'ScoreField', 'make_oracle', 'conditional_expectation_mc',
    'score_ve', 'score_vp', 'score_gbm', 'score_besq', 'score_besq_general',
    'score_cir', 'score_cev', 'score_bes3', 'score_bes3_sigma',
    'tweedie_score', 'score_field', 'numeric_score_field', 'stationary_score',
    'eps_from_score', 'score_from_eps',
    'DsmSample', 'BasisScoreModel', 'draw_dsm_samples',
    'dsm_loss_ve', 'dsm_loss_vp', 'dsm_loss_gbm', 'dsm_loss_cir', 'dsm_loss',
    'empirical_dsm_loss', 'fit_basis_score', 'resolve_basis',
    'PositivityGuard', 'ReverseRunConfig', 'SamplerResult',
    'reverse_em_general', 'reverse_em_gbm', 'reverse_em_cir', 'reverse_sample',
    'summarize_samples',
    'Histogram', 'SplineScore', 'EBModel', 'build_histogram', 'lindsey_fit',
    'eb_besq_estimate', 'eb_gbm_estimate', 'eb_bm_estimate',
    'run_eb_experiment', 'compare_gbm_bm', 'efron_prior_grid',
    'RunManifest', 'write_csv', 'write_sidecar', 'read_csv',
]
