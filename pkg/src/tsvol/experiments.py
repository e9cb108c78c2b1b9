"""Reproducible Monte Carlo studies, SV block studies, and figure data.

Study setups are frozen dataclasses with a JSON round trip, so runs can
be configured from files and rerun byte-identically. All randomness is
derived from a single master seed: path i always uses the same stream
regardless of execution order or worker count.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import BracketError, InputError, ParameterError, TsvolError
from .models import (
    HestonParams,
    IncrementSeries,
    LevyModelParams,
    SamplingGrid,
    simulate_cgmy_increments,
    simulate_heston_cgmy,
)
from .pipeline import (
    BlockConfig,
    MmeConfig,
    PipelineConfig,
    estimate_cgmy,
    estimate_iv_blocks,
)
from .seeding import child_seed
from .threshold import (
    ThresholdInputs,
    expansion_Eb,
    mc_Eb,
    solve_threshold_exact_mc,
    threshold_first_order,
    threshold_second_order,
)
from .trqv import PilotVariant, trqv

TRADING_DAYS_PER_YEAR = 252

#: named observation frequencies, in seconds per increment
FREQUENCY_SECONDS = {"5s": 5.0, "1min": 60.0, "5min": 300.0}

#: header of the study CSV; cells that could not be computed hold FAILED
STUDY_CSV_HEADER = (
    "estimator name,sample mean,sample SD,"
    "mean relative error,SD of relative error,MSE"
)

#: header of the SV study CSV
SV_CSV_HEADER = "day,paths used,paths failed,MAD,median estimate,median true IV"

#: header of the truncation-equation figure CSV
EB_CSV_HEADER = "eps,lhs_eq31,lhs_eq41"

FAILED_CELL = "FAILED"

#: study rows, in output order: the nine pipeline quantities named after
#: the EstimateReport fields they come from, then TRQV at the
#: closed-form threshold of the true parameters, then (optional) TRQV at
#: the Monte Carlo solution of the exact threshold equation
MC_STUDY_ROW_NAMES = (
    "theta1.sigma2",
    "theta1.c",
    "theta1.y",
    "eps1",
    "sigma2_step3",
    "theta2.c",
    "theta2.y",
    "eps_star_hat",
    "sigma2_final",
    "trqv_true_second_order",
    "trqv_true_exact_mc",
)


def _default_model() -> LevyModelParams:
    return LevyModelParams(
        sigma=0.2, c_plus=0.028, c_minus=0.028, y=1.35, g=2.318, m=4.025
    )


def _default_heston() -> HestonParams:
    return HestonParams(kappa=5.0, xi=0.5, theta=0.16, v0=0.16)


@dataclass(frozen=True)
class GridSpec:
    """Observation frequency and calendar for a simulated sample.

    Time is in years with TRADING_DAYS_PER_YEAR trading days per year.
    trading_days days observed every seconds_per_obs seconds over
    hours_per_day hours give n = trading_days * obs_per_day increments
    on [0, trading_days / TRADING_DAYS_PER_YEAR]. frequency "custom"
    takes the interval from the seconds field.
    """

    frequency: str = "5min"
    seconds: float | None = None
    trading_days: int = 252
    hours_per_day: float = 6.5

    def __post_init__(self) -> None:
        if self.frequency == "custom":
            if self.seconds is None or not (self.seconds > 0.0):
                raise ParameterError("custom frequency requires seconds > 0")
        elif self.frequency in FREQUENCY_SECONDS:
            if self.seconds is not None:
                raise ParameterError(
                    "seconds only applies with frequency = 'custom'"
                )
        else:
            known = sorted(FREQUENCY_SECONDS) + ["custom"]
            raise ParameterError(
                f"frequency must be one of {known}, got {self.frequency!r}"
            )
        if self.trading_days < 1:
            raise ParameterError("trading_days must be >= 1")
        if not (0.0 < self.hours_per_day <= 24.0):
            raise ParameterError("hours_per_day must be in (0, 24]")
        per_day = self.hours_per_day * 3600.0 / self.seconds_per_obs
        if abs(per_day - round(per_day)) > 1e-9 * max(per_day, 1.0):
            raise ParameterError(
                "the observation interval must divide the trading day"
            )

    @property
    def seconds_per_obs(self) -> float:
        if self.frequency == "custom":
            return float(self.seconds)
        return FREQUENCY_SECONDS[self.frequency]

    @property
    def obs_per_day(self) -> int:
        return round(self.hours_per_day * 3600.0 / self.seconds_per_obs)

    @property
    def n(self) -> int:
        return self.trading_days * self.obs_per_day

    @property
    def t_horizon(self) -> float:
        return self.trading_days / TRADING_DAYS_PER_YEAR

    def sampling_grid(self) -> SamplingGrid:
        return SamplingGrid(n=self.n, t_horizon=self.t_horizon)


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything needed to rerun a Monte Carlo estimation study.

    include_exact_threshold_row also prices each path's truncated
    variance at the Monte Carlo solution of the exact threshold
    equation, solved once with exact_threshold_paths paths.
    """

    model: LevyModelParams = field(default_factory=_default_model)
    grid: GridSpec = field(default_factory=GridSpec)
    n_paths: int = 200
    master_seed: int = 12345
    pipeline: PipelineConfig = field(default_factory=PipelineConfig)
    include_exact_threshold_row: bool = False
    exact_threshold_paths: int = 200_000
    n_workers: int = 1

    def __post_init__(self) -> None:
        if self.n_paths < 1:
            raise ParameterError("n_paths must be >= 1")
        if self.exact_threshold_paths < 1000:
            raise ParameterError("exact_threshold_paths must be >= 1000")
        if self.n_workers < 1:
            raise ParameterError("n_workers must be >= 1")


@dataclass(frozen=True)
class SvStudyConfig:
    """Setup for the stochastic-volatility daily-IV block study.

    The jump model's sigma field is ignored: the diffusive variance
    comes from the Heston path. sample_days are 1-based trading days;
    only those days are block-estimated.
    """

    jump_model: LevyModelParams = field(default_factory=_default_model)
    heston: HestonParams = field(default_factory=_default_heston)
    grid: GridSpec = field(default_factory=lambda: GridSpec(frequency="5s"))
    n_paths: int = 50
    master_seed: int = 12345
    sample_days: tuple[int, ...] = (2, 30)
    blocks: BlockConfig = field(default_factory=BlockConfig)
    n_workers: int = 1

    def __post_init__(self) -> None:
        if self.n_paths < 1:
            raise ParameterError("n_paths must be >= 1")
        if self.n_workers < 1:
            raise ParameterError("n_workers must be >= 1")
        days = tuple(self.sample_days)
        if not days:
            raise ParameterError("sample_days must not be empty")
        for day in days:
            if day != int(day) or day < 1:
                raise ParameterError(
                    f"sample_days entries must be positive integers, got {day}"
                )
            if day > self.grid.trading_days:
                raise InputError(
                    f"sample day {day} is beyond the simulated horizon of "
                    f"{self.grid.trading_days} trading days"
                )
        object.__setattr__(self, "sample_days", tuple(int(d) for d in days))


@dataclass(frozen=True)
class StudyRow:
    """Aggregate of one estimated quantity across the study paths.

    Statistics are over the n_used paths where the quantity exists; SD
    uses the n-1 divisor and is 0 (flagged) when n_used is 1. MSE is
    the population variance plus squared bias, so MSE = SD^2 (n-1)/n +
    (mean - truth)^2 holds exactly. Relative errors are
    (estimate - truth) / truth. Cells are NaN when undefined.
    """

    name: str
    mean: float
    sd: float
    rel_mean: float
    rel_sd: float
    mse: float
    n_used: int = 0
    n_failed: int = 0
    flags: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.n_used < 0 or self.n_failed < 0:
            raise ParameterError("path counts must be >= 0")
        if math.isfinite(self.mse) and self.mse < 0.0:
            raise ParameterError("MSE must be >= 0")


@dataclass(frozen=True)
class SvDayRow:
    """One sampled day's accuracy summary across the study paths.

    mad is the median over paths of |estimated IV - true IV| for the
    day. Medians of the estimates and truths are kept for scale.
    """

    day: int
    n_used: int
    n_failed: int
    mad: float
    median_estimate: float
    median_true_iv: float


# ---------------------------------------------------------------------------
# JSON round trip


def _reject_unknown(data: dict, allowed: set[str], what: str) -> None:
    extra = sorted(set(data) - allowed)
    if extra:
        raise InputError(f"unknown {what} fields: {extra}")


def _model_from_dict(data: dict) -> LevyModelParams:
    allowed = {
        "sigma", "c_plus", "c_minus", "y", "g", "m", "drift_convention", "b",
    }
    _reject_unknown(data, allowed, "model")
    return LevyModelParams(**data)


def _heston_from_dict(data: dict) -> HestonParams:
    _reject_unknown(data, {"kappa", "xi", "theta", "v0"}, "heston")
    return HestonParams(**data)


def _grid_from_dict(data: dict) -> GridSpec:
    allowed = {"frequency", "seconds", "trading_days", "hours_per_day"}
    _reject_unknown(data, allowed, "grid")
    return GridSpec(**data)


def _pilot_from_value(value) -> PilotVariant | None:
    if value is None:
        return None
    try:
        return PilotVariant(value)
    except ValueError:
        raise InputError(
            f"unknown pilot_variant {value!r}; valid values are "
            f"{[v.value for v in PilotVariant]} or null"
        ) from None


def _mme_from_dict(data: dict) -> MmeConfig:
    allowed = {"init_c", "init_y", "xatol", "fatol", "maxiter"}
    _reject_unknown(data, allowed, "mme")
    return MmeConfig(**data)


def _pipeline_from_dict(data: dict) -> PipelineConfig:
    _reject_unknown(data, {"pilot_variant", "mme", "extra_rounds"}, "pipeline")
    kwargs = dict(data)
    if "pilot_variant" in kwargs:
        kwargs["pilot_variant"] = _pilot_from_value(kwargs["pilot_variant"])
    if "mme" in kwargs:
        kwargs["mme"] = _mme_from_dict(kwargs["mme"])
    return PipelineConfig(**kwargs)


def _blocks_from_dict(data: dict) -> BlockConfig:
    _reject_unknown(data, {"k_n", "pilot_variant", "mme_config"}, "blocks")
    kwargs = dict(data)
    if "pilot_variant" in kwargs:
        kwargs["pilot_variant"] = _pilot_from_value(kwargs["pilot_variant"])
    if "mme_config" in kwargs:
        kwargs["mme_config"] = _mme_from_dict(kwargs["mme_config"])
    return BlockConfig(**kwargs)


def experiment_config_to_dict(config: ExperimentConfig) -> dict:
    return asdict(config)


def experiment_config_from_dict(data: dict) -> ExperimentConfig:
    allowed = {
        "model", "grid", "n_paths", "master_seed", "pipeline",
        "include_exact_threshold_row", "exact_threshold_paths", "n_workers",
    }
    _reject_unknown(data, allowed, "experiment config")
    kwargs = dict(data)
    if "model" in kwargs:
        kwargs["model"] = _model_from_dict(kwargs["model"])
    if "grid" in kwargs:
        kwargs["grid"] = _grid_from_dict(kwargs["grid"])
    if "pipeline" in kwargs:
        kwargs["pipeline"] = _pipeline_from_dict(kwargs["pipeline"])
    return ExperimentConfig(**kwargs)


def sv_config_to_dict(config: SvStudyConfig) -> dict:
    data = asdict(config)
    data["sample_days"] = list(config.sample_days)
    return data


def sv_config_from_dict(data: dict) -> SvStudyConfig:
    allowed = {
        "jump_model", "heston", "grid", "n_paths", "master_seed",
        "sample_days", "blocks", "n_workers",
    }
    _reject_unknown(data, allowed, "SV study config")
    kwargs = dict(data)
    if "jump_model" in kwargs:
        kwargs["jump_model"] = _model_from_dict(kwargs["jump_model"])
    if "heston" in kwargs:
        kwargs["heston"] = _heston_from_dict(kwargs["heston"])
    if "grid" in kwargs:
        kwargs["grid"] = _grid_from_dict(kwargs["grid"])
    if "blocks" in kwargs:
        kwargs["blocks"] = _blocks_from_dict(kwargs["blocks"])
    if "sample_days" in kwargs:
        kwargs["sample_days"] = tuple(kwargs["sample_days"])
    return SvStudyConfig(**kwargs)


def _config_from_json(text: str, from_dict, what: str):
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"invalid JSON in {what}: {exc}") from None
    if not isinstance(data, dict):
        raise InputError(f"{what} must be a JSON object")
    try:
        return from_dict(data)
    except TypeError as exc:
        raise InputError(f"malformed {what}: {exc}") from None


def load_experiment_config(path) -> ExperimentConfig:
    text = Path(path).read_text()
    return _config_from_json(text, experiment_config_from_dict, "experiment config")


def load_sv_config(path) -> SvStudyConfig:
    text = Path(path).read_text()
    return _config_from_json(text, sv_config_from_dict, "SV study config")


def save_experiment_config(config: ExperimentConfig, path) -> None:
    Path(path).write_text(
        json.dumps(experiment_config_to_dict(config), indent=2, sort_keys=True)
        + "\n"
    )


def save_sv_config(config: SvStudyConfig, path) -> None:
    Path(path).write_text(
        json.dumps(sv_config_to_dict(config), indent=2, sort_keys=True) + "\n"
    )


# ---------------------------------------------------------------------------
# Monte Carlo estimation study


def _reference_threshold(config: ExperimentConfig) -> tuple[float, tuple[str, ...]]:
    """Closed-form threshold at the true parameters, for the reference row.

    Falls back (flagged) to the first-order level when the second-order
    bracket fails or the model has no jumps.
    """
    model = config.model
    h = config.grid.sampling_grid().h
    sigma2 = model.sigma**2
    if model.has_jumps:
        try:
            return threshold_second_order(sigma2, model.c_bar, model.y, h), ()
        except BracketError:
            pass
    return (
        threshold_first_order(sigma2, model.y, h),
        ("reference_threshold_first_order",),
    )


def _report_quantities(report) -> dict[str, float | None]:
    t1 = report.theta1
    return {
        "theta1.sigma2": None if t1 is None else t1.sigma2,
        "theta1.c": None if t1 is None else t1.c,
        "theta1.y": None if t1 is None else t1.y,
        "eps1": report.eps1,
        "sigma2_step3": report.sigma2_step3,
        "theta2.c": report.c2,
        "theta2.y": report.y2,
        "eps_star_hat": report.eps_star_hat,
        "sigma2_final": report.sigma2_final,
    }


def _mc_one_path(
    config: ExperimentConfig,
    index: int,
    eps_ref: float,
    eps_exact: float | None,
) -> dict:
    seed = child_seed(config.master_seed, 0, index)
    series = simulate_cgmy_increments(
        config.model, config.grid.sampling_grid(), seed
    )
    out: dict = {"trqv_true_second_order": trqv(series, eps_ref)}
    if eps_exact is not None:
        out["trqv_true_exact_mc"] = trqv(series, eps_exact)
    try:
        report = estimate_cgmy(series, config.pipeline)
    except TsvolError as exc:
        out["error"] = f"{type(exc).__name__}: {exc}"
        return out
    out.update(_report_quantities(report))
    out["report_flags"] = list(report.flags)
    return out


def _aggregate_row(
    name: str,
    values: list,
    truth: float,
    n_paths: int,
    extra_flags: tuple[str, ...] = (),
) -> StudyRow:
    vals = np.array(
        [v for v in values if v is not None and math.isfinite(v)], dtype=float
    )
    n_used = len(vals)
    n_failed = n_paths - n_used
    flags = list(extra_flags)
    if n_used == 0:
        flags.append("all_paths_failed")
        nan = math.nan
        return StudyRow(name, nan, nan, nan, nan, nan, 0, n_failed, tuple(flags))
    mean = float(vals.mean())
    sd = float(vals.std(ddof=1)) if n_used > 1 else 0.0
    if n_used == 1:
        flags.append("degenerate_sd_single_path")
    if truth != 0.0 and math.isfinite(truth):
        rel = (vals - truth) / truth
        rel_mean = float(rel.mean())
        rel_sd = float(rel.std(ddof=1)) if n_used > 1 else 0.0
        mse = sd * sd * (n_used - 1) / n_used + (mean - truth) ** 2
    else:
        flags.append("relative_error_undefined_zero_truth")
        rel_mean = math.nan
        rel_sd = math.nan
        mse = math.nan
    return StudyRow(
        name, mean, sd, rel_mean, rel_sd, mse, n_used, n_failed, tuple(flags)
    )


def run_mc_study(config: ExperimentConfig) -> list[StudyRow]:
    """Simulate n_paths samples, run the full pipeline on each, aggregate.

    Returns one StudyRow per entry of MC_STUDY_ROW_NAMES (the exact-MC
    reference row only when configured). A path whose pipeline raises is
    counted in n_failed for the pipeline rows and its message recorded
    in their flags; the reference rows never depend on the fit. eps
    estimates are compared against the closed-form threshold at the true
    parameters.
    """
    eps_ref, ref_flags = _reference_threshold(config)
    eps_exact = None
    exact_flags: tuple[str, ...] = ()
    if config.include_exact_threshold_row:
        solved = solve_threshold_exact_mc(
            config.model,
            config.grid.sampling_grid(),
            config.exact_threshold_paths,
            child_seed(config.master_seed, 1),
        )
        eps_exact = solved.eps
        exact_flags = (
            f"exact_threshold_bracket:[{solved.eps_lo:.17g},{solved.eps_hi:.17g}]",
        )

    indices = range(config.n_paths)
    if config.n_workers == 1:
        results = [_mc_one_path(config, i, eps_ref, eps_exact) for i in indices]
    else:
        with ProcessPoolExecutor(max_workers=config.n_workers) as pool:
            results = list(
                pool.map(
                    _mc_one_path,
                    [config] * config.n_paths,
                    indices,
                    [eps_ref] * config.n_paths,
                    [eps_exact] * config.n_paths,
                )
            )

    errors = sorted({r["error"] for r in results if "error" in r})
    error_flags = (
        ("fit_failures: " + " | ".join(errors[:3]),) if errors else ()
    )
    flag_counts: dict[str, int] = {}
    for r in results:
        for flag in r.get("report_flags", ()):
            flag_counts[flag] = flag_counts.get(flag, 0) + 1
    fallback_flags = tuple(
        f"paths_flagged {count}x: {flag}" for flag, count in sorted(flag_counts.items())
    )

    model = config.model
    sigma2_true = model.sigma**2
    truth_by_row = {
        "theta1.sigma2": sigma2_true,
        "theta1.c": model.c_bar,
        "theta1.y": model.y,
        "eps1": eps_ref,
        "sigma2_step3": sigma2_true,
        "theta2.c": model.c_bar,
        "theta2.y": model.y,
        "eps_star_hat": eps_ref,
        "sigma2_final": sigma2_true,
        "trqv_true_second_order": sigma2_true,
        "trqv_true_exact_mc": sigma2_true,
    }
    rows = []
    for name in MC_STUDY_ROW_NAMES:
        if name == "trqv_true_exact_mc" and eps_exact is None:
            continue
        extra: tuple[str, ...] = ()
        if name in ("eps1", "eps_star_hat", "trqv_true_second_order"):
            extra += ref_flags
        if name == "trqv_true_exact_mc":
            extra += exact_flags
        if name not in ("trqv_true_second_order", "trqv_true_exact_mc"):
            extra += error_flags
        if name == "sigma2_final":
            extra += fallback_flags
        values = [r.get(name) for r in results]
        rows.append(
            _aggregate_row(name, values, truth_by_row[name], config.n_paths, extra)
        )
    return rows


# ---------------------------------------------------------------------------
# Stochastic-volatility study


def _sv_one_path(config: SvStudyConfig, index: int) -> list[tuple]:
    """(day, estimated IV, true IV | error message) for each sampled day."""
    grid = config.grid.sampling_grid()
    path = simulate_heston_cgmy(
        config.heston,
        config.jump_model,
        grid,
        child_seed(config.master_seed, 0, index),
    )
    obs_per_day = config.grid.obs_per_day
    h = grid.h
    out = []
    for day in config.sample_days:
        lo = (day - 1) * obs_per_day
        hi = day * obs_per_day
        true_iv = path.true_iv(lo * h, hi * h)
        try:
            sub = IncrementSeries(
                path.increments.values[lo:hi],
                SamplingGrid(n=obs_per_day, t_horizon=obs_per_day * h),
            )
            estimates = estimate_iv_blocks(sub, config.blocks)
            covered = len(estimates) * config.blocks.k_n
            if covered == 0:
                raise InputError("no full block fits in one trading day")
            est = sum(e.iv_contribution for e in estimates)
            # a partial block at the end of the day is dropped by the
            # block estimator; scale up to the full day so the estimate
            # targets the same integral as true_iv
            est *= obs_per_day / covered
        except TsvolError as exc:
            out.append((day, None, f"{type(exc).__name__}: {exc}"))
            continue
        out.append((day, float(est), float(true_iv)))
    return out


def run_sv_study(config: SvStudyConfig) -> list[SvDayRow]:
    """Daily integrated-variance accuracy of the block estimator under SV.

    Each path simulates the Heston-driven model over the full grid; the
    configured sample days are split into blocks of k_n increments and
    estimated. Per-day MAD is the median over paths of the absolute
    error against the path's true integrated variance. Paths whose
    estimation fails on a day are counted and skipped for that day.
    """
    indices = range(config.n_paths)
    if config.n_workers == 1:
        per_path = [_sv_one_path(config, i) for i in indices]
    else:
        with ProcessPoolExecutor(max_workers=config.n_workers) as pool:
            per_path = list(
                pool.map(_sv_one_path, [config] * config.n_paths, indices)
            )

    rows = []
    for day in config.sample_days:
        ests, trues = [], []
        n_failed = 0
        for path_result in per_path:
            for d, est, true_or_msg in path_result:
                if d != day:
                    continue
                if est is None:
                    n_failed += 1
                else:
                    ests.append(est)
                    trues.append(true_or_msg)
        if ests:
            errs = np.abs(np.array(ests) - np.array(trues))
            rows.append(
                SvDayRow(
                    day=day,
                    n_used=len(ests),
                    n_failed=n_failed,
                    mad=float(np.median(errs)),
                    median_estimate=float(np.median(ests)),
                    median_true_iv=float(np.median(trues)),
                )
            )
        else:
            nan = math.nan
            rows.append(SvDayRow(day, 0, n_failed, nan, nan, nan))
    return rows


# ---------------------------------------------------------------------------
# Truncation-equation figure data


def eb_equation_curves(
    params: LevyModelParams,
    grid: SamplingGrid,
    eps_grid=None,
    mc_paths: int = 200_000,
    seed: int = 0,
):
    """Left-hand sides of the exact and expanded threshold equations.

    Both curves are eps^2 + 2 (n-1) E[X_h^2 1{|X_h| <= eps}] - 2 T
    sigma^2, with the expectation from tilted Monte Carlo (exact) or
    from its three-term expansion. Each crosses zero at the
    corresponding optimal threshold. Returns (eps, lhs_exact,
    lhs_expansion) arrays.
    """
    inputs = ThresholdInputs.from_model(params, grid)
    if eps_grid is None:
        ref = threshold_first_order(inputs.sigma2, inputs.y, inputs.h)
        eps_grid = np.linspace(0.2 * ref, 4.0 * ref, 401)
    else:
        eps_grid = np.asarray(eps_grid, dtype=float)
        if eps_grid.ndim != 1 or len(eps_grid) < 2:
            raise InputError("eps_grid must be a 1-D array of at least 2 points")
        if np.any(eps_grid <= 0.0) or np.any(np.diff(eps_grid) <= 0.0):
            raise InputError("eps_grid must be positive and strictly increasing")

    const = 2.0 * inputs.n * inputs.h * inputs.sigma2
    scale = 2.0 * (inputs.n - 1)
    eb_exact, _ = mc_Eb(params, inputs.h, eps_grid, mc_paths, seed)
    lhs_exact = eps_grid**2 + scale * eb_exact - const
    lhs_expansion = eps_grid**2 + scale * expansion_Eb(eps_grid, inputs) - const
    return eps_grid, lhs_exact, lhs_expansion


# ---------------------------------------------------------------------------
# CSV output


def _cell(value: float) -> str:
    if value is None or not math.isfinite(value):
        return FAILED_CELL
    return f"{value:.17g}"


def save_study_rows(rows: list[StudyRow], path) -> None:
    """Write study rows as CSV with the pinned STUDY_CSV_HEADER columns.

    Every numeric cell is either a finite %.17g value or FAILED. Output
    is a pure function of the rows, so reruns are byte-identical.
    """
    lines = [STUDY_CSV_HEADER]
    for r in rows:
        lines.append(
            ",".join(
                [r.name, _cell(r.mean), _cell(r.sd), _cell(r.rel_mean),
                 _cell(r.rel_sd), _cell(r.mse)]
            )
        )
    Path(path).write_text("\n".join(lines) + "\n")


def save_study_meta(rows: list[StudyRow], config: ExperimentConfig, path) -> None:
    """JSON sidecar with per-row path counts and flags plus the config."""
    meta = {
        "config": experiment_config_to_dict(config),
        "rows": [
            {
                "name": r.name,
                "n_used": r.n_used,
                "n_failed": r.n_failed,
                "flags": list(r.flags),
            }
            for r in rows
        ],
    }
    Path(path).write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


def save_sv_rows(rows: list[SvDayRow], path) -> None:
    """Write SV study rows as CSV with the SV_CSV_HEADER columns."""
    lines = [SV_CSV_HEADER]
    for r in rows:
        lines.append(
            ",".join(
                [str(r.day), str(r.n_used), str(r.n_failed), _cell(r.mad),
                 _cell(r.median_estimate), _cell(r.median_true_iv)]
            )
        )
    Path(path).write_text("\n".join(lines) + "\n")


def save_eb_curves(eps, lhs_exact, lhs_expansion, path) -> None:
    """Write the two equation curves as CSV with the EB_CSV_HEADER columns."""
    lines = [EB_CSV_HEADER]
    for e, a, b in zip(eps, lhs_exact, lhs_expansion):
        lines.append(f"{e:.17g},{_cell(float(a))},{_cell(float(b))}")
    Path(path).write_text("\n".join(lines) + "\n")
