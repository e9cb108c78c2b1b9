"""Volatility and jump-activity estimation for tempered-stable models.

High-frequency increments of a Brownian-plus-CGMY process carry the
diffusive variance in their small moves and the jump activity in their
tails. This package estimates both: truncated realized variance with
MSE-optimal thresholds, a method-of-moments refinement of the jump
parameters, and a block-localized integrated-variance estimator for
stochastic volatility, plus a Monte Carlo experiment harness and CLI.
"""

from .errors import (
    BracketError,
    InputError,
    NumericsError,
    OptimizerError,
    ParameterError,
    TsvolError,
)
from .moments import (
    MomentSpec,
    ThetaEstimate,
    empirical_moments,
    eval_moments,
    minimize,
    model_expectation,
    moment_objective,
    solve_fixed_sigma,
    tuning_frequency,
)
from .pipeline import (
    BlockConfig,
    BlockEstimate,
    EstimateReport,
    MmeConfig,
    PipelineConfig,
    aggregate_daily_iv,
    estimate_cgmy,
    estimate_iv_blocks,
)
from .models import (
    HestonParams,
    IncrementSeries,
    LevyModelParams,
    SamplingGrid,
    SvPath,
    big_jump_mean,
    cgmy_cf,
    eta_constant,
    gamma_tilde,
    load_increments,
    save_increments,
    simulate_cgmy_increments,
    simulate_heston_cgmy,
    small_jump_variance,
)
from .experiments import (
    ExperimentConfig,
    GridSpec,
    StudyRow,
    SvDayRow,
    SvStudyConfig,
    eb_equation_curves,
    experiment_config_from_dict,
    experiment_config_to_dict,
    load_experiment_config,
    load_sv_config,
    run_mc_study,
    run_sv_study,
    save_eb_curves,
    save_experiment_config,
    save_study_meta,
    save_study_rows,
    save_sv_config,
    save_sv_rows,
    sv_config_from_dict,
    sv_config_to_dict,
)
from .seeding import child_seed, derive_rng
from .stable import StableLaw, gamma_neg, one_sided_scale, sample_stable, stable_cf
from .threshold import (
    ExactMcThreshold,
    ThresholdInputs,
    expansion_Eb,
    mc_Eb,
    solve_threshold_exact_mc,
    solve_threshold_expansion,
    threshold_first_order,
    threshold_second_order,
)
from .trqv import PilotVariant, pilot_sigma, realized_variance, trqv

__all__ = [
    "HestonParams",
    "IncrementSeries",
    "LevyModelParams",
    "SamplingGrid",
    "SvPath",
    "big_jump_mean",
    "cgmy_cf",
    "child_seed",
    "derive_rng",
    "eta_constant",
    "gamma_tilde",
    "load_increments",
    "save_increments",
    "simulate_cgmy_increments",
    "simulate_heston_cgmy",
    "small_jump_variance",
    "BracketError",
    "InputError",
    "NumericsError",
    "OptimizerError",
    "ParameterError",
    "TsvolError",
    "StableLaw",
    "gamma_neg",
    "one_sided_scale",
    "sample_stable",
    "stable_cf",
    "ExactMcThreshold",
    "ThresholdInputs",
    "expansion_Eb",
    "mc_Eb",
    "solve_threshold_exact_mc",
    "solve_threshold_expansion",
    "threshold_first_order",
    "threshold_second_order",
    "PilotVariant",
    "pilot_sigma",
    "realized_variance",
    "trqv",
    "MomentSpec",
    "ThetaEstimate",
    "empirical_moments",
    "eval_moments",
    "minimize",
    "model_expectation",
    "moment_objective",
    "solve_fixed_sigma",
    "tuning_frequency",
    "BlockConfig",
    "BlockEstimate",
    "EstimateReport",
    "MmeConfig",
    "PipelineConfig",
    "aggregate_daily_iv",
    "estimate_cgmy",
    "estimate_iv_blocks",
    "ExperimentConfig",
    "GridSpec",
    "StudyRow",
    "SvDayRow",
    "SvStudyConfig",
    "eb_equation_curves",
    "experiment_config_from_dict",
    "experiment_config_to_dict",
    "load_experiment_config",
    "load_sv_config",
    "run_mc_study",
    "run_sv_study",
    "save_eb_curves",
    "save_experiment_config",
    "save_study_meta",
    "save_study_rows",
    "save_sv_config",
    "save_sv_rows",
    "sv_config_from_dict",
    "sv_config_to_dict",
]

__version__ = "0.1.0"
