"""Five-step estimation pipeline and block-localized integrated variance.

The pipeline alternates moment fits with threshold refinements: a pilot
variance seeds a full moment fit, whose parameters set a truncation
level; the truncated variance then pins a second jump-parameter fit,
which sets the final truncation level for the variance estimate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

from .errors import BracketError, InputError, ParameterError, TsvolError
from .models import IncrementSeries, SamplingGrid
from .moments import (
    MomentSpec,
    ThetaEstimate,
    minimize,
    moment_objective,
    solve_fixed_sigma,
    tuning_frequency,
)
from .threshold import threshold_first_order, threshold_second_order
from .trqv import PilotVariant, pilot_sigma, realized_variance, trqv

#: realized variance above which the heavier-truncation pilot is used
PILOT_SWITCH_RV = 0.09

#: fewer observations than this makes the moment fits unreliable
SOFT_MIN_OBS = 1000

#: floor on eps^2 / (sigma^2 h): the threshold expansion assumes the cut
#: sits far out in the Gaussian tail, and a cut under two standard
#: deviations truncates the diffusion itself
REGIME_Q2_MIN = 4.0

#: a block fit whose final variance departs from its own pilot by more
#: than this factor either way is treated as a failed fit
BLOCK_PILOT_BAND = 1.5


@dataclass(frozen=True)
class MmeConfig:
    """Inits and stopping rules shared by both moment fits."""

    init_c: float = 0.1
    init_y: float = 1.3
    xatol: float = 1e-8
    fatol: float = 1e-8
    maxiter: int = 500

    def __post_init__(self) -> None:
        if not (self.init_c > 0.0 and 1.0 < self.init_y < 2.0):
            raise ParameterError("inits must satisfy c > 0 and y in (1, 2)")
        if self.maxiter < 1:
            raise ParameterError("maxiter must be >= 1")


@dataclass(frozen=True)
class PipelineConfig:
    """Pilot selection, fit configuration, and optional iteration.

    pilot_variant None applies the automatic rule: p01 when the realized
    variance exceeds PILOT_SWITCH_RV, else p02. extra_rounds repeats the
    fixed-sigma fit and final truncation with the previous round's
    output variance; off by default since it tends to add sample error.
    """

    pilot_variant: PilotVariant | None = None
    mme: MmeConfig = field(default_factory=MmeConfig)
    extra_rounds: int = 0

    def __post_init__(self) -> None:
        if not (0 <= self.extra_rounds <= 5):
            raise ParameterError("extra_rounds must be between 0 and 5")


@dataclass(frozen=True)
class EstimateReport:
    """Every stage of the five-step procedure, with fallback flags.

    Later fields stay None when an earlier stage failed; the flags tuple
    says which fallback or failure occurred. eps1 and eps_star_hat are
    positive whenever set.
    """

    pilot_sigma2: float
    pilot_variant: str
    theta1: ThetaEstimate | None = None
    eps1: float | None = None
    sigma2_step3: float | None = None
    theta2: ThetaEstimate | None = None
    eps_star_hat: float | None = None
    sigma2_final: float | None = None
    flags: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if not (self.pilot_sigma2 > 0.0):
            raise ParameterError("pilot_sigma2 must be positive")
        for name in ("eps1", "eps_star_hat"):
            val = getattr(self, name)
            if val is not None and not (val > 0.0):
                raise ParameterError(f"{name} must be positive when set")

    @property
    def c2(self) -> float | None:
        return None if self.theta2 is None else self.theta2.c

    @property
    def y2(self) -> float | None:
        return None if self.theta2 is None else self.theta2.y


@dataclass(frozen=True)
class BlockConfig:
    """Block length and per-block estimation settings."""

    k_n: int = 160
    pilot_variant: PilotVariant | None = None
    mme_config: MmeConfig = field(default_factory=MmeConfig)

    def __post_init__(self) -> None:
        if self.k_n < 32:
            raise ParameterError(f"k_n must be >= 32, got {self.k_n}")


@dataclass(frozen=True)
class BlockEstimate:
    """One block's variance estimate and its share of integrated variance."""

    block_index: int
    sigma2_hat: float
    iv_contribution: float
    flags: tuple[str, ...] = ()


def _second_order_or_fallback(sigma2, c_bar, y, h, flags, label):
    # fallback levels are floored at the regime boundary: near y = 2 the
    # first-order level itself degenerates through its (2 - y) factor
    floor = math.sqrt(REGIME_Q2_MIN * sigma2 * h)
    try:
        eps = threshold_second_order(sigma2, c_bar, y, h)
    except (BracketError, ParameterError):
        flags.append(f"{label}_first_order_fallback")
        return max(threshold_first_order(sigma2, y, h), floor)
    if eps * eps < REGIME_Q2_MIN * sigma2 * h:
        # a noisy fit (typically on a short block) can push the
        # second-order level into the diffusion core where the
        # expansion it comes from no longer holds
        flags.append(f"{label}_out_of_regime_fallback")
        return max(threshold_first_order(sigma2, y, h), floor)
    return eps


def estimate_cgmy(series: IncrementSeries, config: PipelineConfig | None = None) -> EstimateReport:
    """Run the five-step procedure on one increment series.

    (1) pilot variance and tuning frequency, (2) full moment fit,
    (3) second-order truncation and truncated variance, (4) jump
    parameters refit with that variance pinned, (5) final truncation
    and variance. Threshold bracket failures fall back to the
    first-order level; an optimizer failure ends the report at the last
    completed stage. The result is deterministic in (series, config).
    """
    config = config or PipelineConfig()
    h = series.grid.h
    flags: list[str] = []
    if series.grid.n < SOFT_MIN_OBS:
        flags.append("short_series")

    variant = config.pilot_variant
    if variant is None:
        variant = (
            PilotVariant.P01
            if realized_variance(series) > PILOT_SWITCH_RV
            else PilotVariant.P02
        )
    pilot = pilot_sigma(series, variant)
    if not (pilot > 0.0):
        raise InputError(
            f"pilot variance is {pilot}; the series has no usable variation"
        )
    mme = config.mme
    report = EstimateReport(
        pilot_sigma2=pilot, pilot_variant=str(variant.value), flags=tuple(flags)
    )

    spec_f = MomentSpec(tag="f_set", scaling_u=tuning_frequency(pilot, h))
    init = ThetaEstimate(sigma2=pilot, c=mme.init_c, y=mme.init_y)
    try:
        theta1 = minimize(
            lambda th: moment_objective(th, series, spec_f),
            init,
            xatol=mme.xatol,
            fatol=mme.fatol,
            maxiter=mme.maxiter,
        )
    except TsvolError as exc:
        flags.append(f"stage2_optimizer_failed: {exc}")
        return replace(report, flags=tuple(flags))
    report = replace(report, theta1=theta1)

    eps1 = _second_order_or_fallback(theta1.sigma2, theta1.c, theta1.y, h, flags, "eps1")
    sigma2_step3 = trqv(series, eps1)
    report = replace(report, eps1=eps1, sigma2_step3=sigma2_step3, flags=tuple(flags))
    if not (sigma2_step3 > 0.0):
        flags.append("truncated_variance_not_positive")
        return replace(report, flags=tuple(flags))

    sigma2_pin = sigma2_step3
    theta2 = None
    eps_star = None
    sigma2_final = None
    for round_idx in range(1 + config.extra_rounds):
        try:
            theta2 = solve_fixed_sigma(
                series,
                sigma2_pin,
                (mme.init_c, mme.init_y),
                xatol=mme.xatol,
                fatol=mme.fatol,
                maxiter=mme.maxiter,
            )
        except TsvolError as exc:
            flags.append(f"stage4_optimizer_failed: {exc}")
            return replace(report, flags=tuple(flags))
        eps_star = _second_order_or_fallback(
            sigma2_pin, theta2.c, theta2.y, h, flags, "eps_star"
        )
        sigma2_final = trqv(series, eps_star)
        if round_idx < config.extra_rounds:
            if not (sigma2_final > 0.0):
                flags.append("iteration_stopped_nonpositive_variance")
                break
            sigma2_pin = sigma2_final
    return replace(
        report,
        theta2=theta2,
        eps_star_hat=eps_star,
        sigma2_final=sigma2_final,
        flags=tuple(flags),
    )


def estimate_iv_blocks(
    series: IncrementSeries, blocks: BlockConfig | None = None
) -> list[BlockEstimate]:
    """Blockwise variance estimation for time-varying volatility.

    Consecutive blocks of k_n increments are each treated as constant
    volatility and run through estimate_cgmy; a final partial block is
    dropped (flagged on the last kept block). A block whose pipeline
    fails falls back to its own pilot variance. iv_contribution is
    sigma2_hat times the block's time span.
    """
    blocks = blocks or BlockConfig()
    k = blocks.k_n
    n = series.grid.n
    if n < k:
        raise InputError(f"series has {n} increments, shorter than one block of {k}")
    h = series.grid.h
    n_blocks = n // k
    dropped = n - n_blocks * k
    config = PipelineConfig(pilot_variant=blocks.pilot_variant, mme=blocks.mme_config)
    out: list[BlockEstimate] = []
    for i in range(n_blocks):
        sub = IncrementSeries(
            series.values[i * k : (i + 1) * k], SamplingGrid(n=k, t_horizon=k * h)
        )
        flags: list[str] = []
        sigma2_hat = None
        try:
            report = estimate_cgmy(sub, config)
            if report.sigma2_final is not None and report.sigma2_final > 0.0:
                ratio = report.sigma2_final / report.pilot_sigma2
                if 1.0 / BLOCK_PILOT_BAND <= ratio <= BLOCK_PILOT_BAND:
                    sigma2_hat = report.sigma2_final
                else:
                    # on k_n observations the moment system is weakly
                    # identified and the fit can wander; a final variance
                    # far from its own pilot marks a junk fit
                    flags.append("block_fit_inconsistent_with_pilot")
            else:
                flags.extend(report.flags)
        except TsvolError as exc:
            flags.append(f"block_pipeline_error: {exc}")
        if sigma2_hat is None:
            sigma2_hat = pilot_sigma(sub, PilotVariant.P02)
            flags.append("pilot_fallback")
        if i == n_blocks - 1 and dropped:
            flags.append(f"dropped_tail_increments:{dropped}")
        out.append(
            BlockEstimate(
                block_index=i,
                sigma2_hat=sigma2_hat,
                iv_contribution=sigma2_hat * k * h,
                flags=tuple(flags),
            )
        )
    return out


def aggregate_daily_iv(
    estimates: list[BlockEstimate], k_n: int, obs_per_day: int
) -> list[float]:
    """Sum block contributions into calendar days.

    A block straddling a day boundary contributes proportionally to the
    overlap, so the sum over days always equals the sum over blocks.
    """
    if k_n < 1 or obs_per_day < 1:
        raise ParameterError("k_n and obs_per_day must be positive")
    if not estimates:
        return []
    total_obs = (estimates[-1].block_index + 1) * k_n
    n_days = math.ceil(total_obs / obs_per_day)
    days = [0.0] * n_days
    for est in estimates:
        lo = est.block_index * k_n
        hi = lo + k_n
        d = lo // obs_per_day
        while d * obs_per_day < hi:
            overlap = min(hi, (d + 1) * obs_per_day) - max(lo, d * obs_per_day)
            days[d] += est.iv_contribution * overlap / k_n
            d += 1
    return days
