"""Command-line front end.

Subcommands cover simulation, threshold computation, single-series
estimation, the two study drivers, and the truncation-equation figure
data. Exit codes: 0 on success, 2 for configuration or input problems,
3 for numerical failures.
"""

from __future__ import annotations

import dataclasses
import functools
import json
import sys

import click
import numpy as np

from .errors import (
    BracketError,
    InputError,
    NumericsError,
    OptimizerError,
    ParameterError,
)
from .experiments import (
    GridSpec,
    eb_equation_curves,
    load_experiment_config,
    load_sv_config,
    run_mc_study,
    run_sv_study,
    save_eb_curves,
    save_study_meta,
    save_study_rows,
    save_sv_rows,
)
from .models import (
    LevyModelParams,
    load_increments,
    save_increments,
    simulate_cgmy_increments,
)
from .pipeline import MmeConfig, PipelineConfig, estimate_cgmy
from .threshold import (
    ThresholdInputs,
    solve_threshold_exact_mc,
    solve_threshold_expansion,
    threshold_first_order,
    threshold_second_order,
)
from .trqv import PilotVariant

_CONFIG_ERRORS = (InputError, ParameterError, OSError)
_NUMERICAL_ERRORS = (NumericsError, BracketError, OptimizerError)


def _guarded(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except _NUMERICAL_ERRORS as exc:
            click.echo(f"numerical failure: {exc}", err=True)
            sys.exit(3)
        except _CONFIG_ERRORS as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(2)

    return wrapper


def _model_options(fn):
    opts = [
        click.option("--sigma", type=float, default=0.2, show_default=True,
                     help="Diffusive volatility."),
        click.option("--c-plus", type=float, default=0.028, show_default=True,
                     help="Positive-jump intensity."),
        click.option("--c-minus", type=float, default=0.028, show_default=True,
                     help="Negative-jump intensity."),
        click.option("--y", type=float, default=1.35, show_default=True,
                     help="Jump activity index, in (1, 2)."),
        click.option("--g", type=float, default=2.318, show_default=True,
                     help="Tempering rate of negative jumps."),
        click.option("--m", type=float, default=4.025, show_default=True,
                     help="Tempering rate of positive jumps."),
    ]
    for opt in reversed(opts):
        fn = opt(fn)
    return fn


def _grid_options(fn):
    opts = [
        click.option("--frequency", type=click.Choice(["5s", "1min", "5min", "custom"]),
                     default="5min", show_default=True,
                     help="Observation frequency."),
        click.option("--seconds", type=float, default=None,
                     help="Seconds per observation (frequency 'custom' only)."),
        click.option("--trading-days", type=int, default=252, show_default=True,
                     help="Number of simulated trading days."),
        click.option("--hours-per-day", type=float, default=6.5, show_default=True,
                     help="Observed hours per trading day."),
    ]
    for opt in reversed(opts):
        fn = opt(fn)
    return fn


def _build_model(sigma, c_plus, c_minus, y, g, m) -> LevyModelParams:
    return LevyModelParams(
        sigma=sigma, c_plus=c_plus, c_minus=c_minus, y=y, g=g, m=m
    )


def _build_grid(frequency, seconds, trading_days, hours_per_day) -> GridSpec:
    return GridSpec(
        frequency=frequency,
        seconds=seconds,
        trading_days=trading_days,
        hours_per_day=hours_per_day,
    )


@click.group()
def main() -> None:
    """Volatility and jump-activity estimation for tempered-stable models."""


@main.command()
@_model_options
@_grid_options
@click.option("--seed", type=int, default=0, show_default=True,
              help="Seed of the simulated path.")
@click.option("--out", type=click.Path(dir_okay=False), required=True,
              help="Output CSV of increments.")
@_guarded
def simulate(sigma, c_plus, c_minus, y, g, m, frequency, seconds,
             trading_days, hours_per_day, seed, out) -> None:
    """Simulate one increment series and write it as CSV."""
    model = _build_model(sigma, c_plus, c_minus, y, g, m)
    spec = _build_grid(frequency, seconds, trading_days, hours_per_day)
    series = simulate_cgmy_increments(model, spec.sampling_grid(), seed)
    save_increments(series, out)
    click.echo(
        f"wrote {spec.n} increments spanning {spec.t_horizon:.17g} years to {out}"
    )


@main.command()
@_model_options
@_grid_options
@click.option("--mc-paths", type=int, default=200_000, show_default=True,
              help="Monte Carlo paths for the exact threshold equation.")
@click.option("--seed", type=int, default=0, show_default=True,
              help="Seed of the Monte Carlo solve.")
@_guarded
def threshold(sigma, c_plus, c_minus, y, g, m, frequency, seconds,
              trading_days, hours_per_day, mc_paths, seed) -> None:
    """Print the four threshold levels for a model and grid."""
    model = _build_model(sigma, c_plus, c_minus, y, g, m)
    spec = _build_grid(frequency, seconds, trading_days, hours_per_day)
    grid = spec.sampling_grid()
    inputs = ThresholdInputs.from_model(model, grid)
    sigma2 = model.sigma**2
    click.echo(
        f"first_order {threshold_first_order(sigma2, model.y, grid.h):.17g}"
    )
    click.echo(
        "second_order "
        f"{threshold_second_order(sigma2, model.c_bar, model.y, grid.h):.17g}"
    )
    click.echo(f"expansion_root {solve_threshold_expansion(inputs):.17g}")
    solved = solve_threshold_exact_mc(model, grid, mc_paths, seed)
    click.echo(
        f"exact_mc {solved.eps:.17g} "
        f"(bracket [{solved.eps_lo:.17g}, {solved.eps_hi:.17g}], "
        f"{solved.npaths} paths)"
    )


@main.command()
@click.option("--increments", type=click.Path(exists=False, dir_okay=False),
              required=True, help="CSV of increments, as written by simulate.")
@click.option("--t-horizon", type=float, required=True,
              help="Time span of the series in years.")
@click.option("--pilot", type=click.Choice([v.value for v in PilotVariant]),
              default=None, help="Pilot estimator (default: automatic rule).")
@click.option("--extra-rounds", type=int, default=0, show_default=True,
              help="Additional fixed-point rounds of the final two stages.")
@click.option("--maxiter", type=int, default=500, show_default=True,
              help="Iteration cap of each moment fit.")
@click.option("--as-json", is_flag=True, help="Emit the report as JSON.")
@_guarded
def estimate(increments, t_horizon, pilot, extra_rounds, maxiter, as_json) -> None:
    """Run the full estimation pipeline on an increments CSV."""
    series = load_increments(increments, t_horizon)
    config = PipelineConfig(
        pilot_variant=None if pilot is None else PilotVariant(pilot),
        mme=MmeConfig(maxiter=maxiter),
        extra_rounds=extra_rounds,
    )
    report = estimate_cgmy(series, config)
    if as_json:
        click.echo(json.dumps(dataclasses.asdict(report), indent=2, sort_keys=True))
        return
    click.echo(f"pilot_variant {report.pilot_variant}")
    click.echo(f"pilot_sigma2 {report.pilot_sigma2:.17g}")
    pairs = [
        ("theta1.sigma2", None if report.theta1 is None else report.theta1.sigma2),
        ("theta1.c", None if report.theta1 is None else report.theta1.c),
        ("theta1.y", None if report.theta1 is None else report.theta1.y),
        ("eps1", report.eps1),
        ("sigma2_step3", report.sigma2_step3),
        ("theta2.c", report.c2),
        ("theta2.y", report.y2),
        ("eps_star_hat", report.eps_star_hat),
        ("sigma2_final", report.sigma2_final),
    ]
    for name, value in pairs:
        click.echo(f"{name} {'FAILED' if value is None else format(value, '.17g')}")
    for flag in report.flags:
        click.echo(f"flag {flag}")


@main.command(name="mc-study")
@click.option("--config", "config_path", type=click.Path(dir_okay=False),
              required=True, help="Experiment config JSON.")
@click.option("--out", type=click.Path(dir_okay=False), required=True,
              help="Output CSV; a .meta.json sidecar is written next to it.")
@click.option("--paths", type=int, default=None,
              help="Override n_paths from the config.")
@click.option("--seed", type=int, default=None,
              help="Override master_seed from the config.")
@click.option("--workers", type=int, default=None,
              help="Override n_workers from the config.")
@_guarded
def mc_study(config_path, out, paths, seed, workers) -> None:
    """Run a Monte Carlo estimation study from a config file."""
    config = load_experiment_config(config_path)
    overrides = {}
    if paths is not None:
        overrides["n_paths"] = paths
    if seed is not None:
        overrides["master_seed"] = seed
    if workers is not None:
        overrides["n_workers"] = workers
    if overrides:
        config = dataclasses.replace(config, **overrides)
    rows = run_mc_study(config)
    save_study_rows(rows, out)
    save_study_meta(rows, config, out + ".meta.json")
    for row in rows:
        click.echo(
            f"{row.name}: mean {row.mean:.6g}, sd {row.sd:.6g}, "
            f"mse {row.mse:.6g} ({row.n_used} paths, {row.n_failed} failed)"
        )
    click.echo(f"wrote {out}")


@main.command(name="sv-study")
@click.option("--config", "config_path", type=click.Path(dir_okay=False),
              required=True, help="SV study config JSON.")
@click.option("--out", type=click.Path(dir_okay=False), required=True,
              help="Output CSV.")
@click.option("--paths", type=int, default=None,
              help="Override n_paths from the config.")
@click.option("--seed", type=int, default=None,
              help="Override master_seed from the config.")
@click.option("--workers", type=int, default=None,
              help="Override n_workers from the config.")
@_guarded
def sv_study(config_path, out, paths, seed, workers) -> None:
    """Run the stochastic-volatility daily-IV study from a config file."""
    config = load_sv_config(config_path)
    overrides = {}
    if paths is not None:
        overrides["n_paths"] = paths
    if seed is not None:
        overrides["master_seed"] = seed
    if workers is not None:
        overrides["n_workers"] = workers
    if overrides:
        config = dataclasses.replace(config, **overrides)
    rows = run_sv_study(config)
    save_sv_rows(rows, out)
    for row in rows:
        click.echo(
            f"day {row.day}: MAD {row.mad:.6g}, median IV {row.median_estimate:.6g} "
            f"vs true {row.median_true_iv:.6g} "
            f"({row.n_used} paths, {row.n_failed} failed)"
        )
    click.echo(f"wrote {out}")


@main.command()
@_model_options
@_grid_options
@click.option("--eps-min", type=float, default=None,
              help="Lower end of the eps grid (default: 0.2x first-order level).")
@click.option("--eps-max", type=float, default=None,
              help="Upper end of the eps grid (default: 4x first-order level).")
@click.option("--points", type=int, default=401, show_default=True,
              help="Number of eps grid points.")
@click.option("--mc-paths", type=int, default=200_000, show_default=True,
              help="Monte Carlo paths for the exact curve.")
@click.option("--seed", type=int, default=0, show_default=True,
              help="Seed of the Monte Carlo curve.")
@click.option("--out", type=click.Path(dir_okay=False), required=True,
              help="Output CSV of the two equation curves.")
@_guarded
def eb(sigma, c_plus, c_minus, y, g, m, frequency, seconds, trading_days,
       hours_per_day, eps_min, eps_max, points, mc_paths, seed, out) -> None:
    """Tabulate the exact and expanded threshold equations on an eps grid."""
    model = _build_model(sigma, c_plus, c_minus, y, g, m)
    spec = _build_grid(frequency, seconds, trading_days, hours_per_day)
    grid = spec.sampling_grid()
    if points < 2:
        raise InputError("points must be >= 2")
    ref = threshold_first_order(model.sigma**2, model.y, grid.h)
    lo = 0.2 * ref if eps_min is None else eps_min
    hi = 4.0 * ref if eps_max is None else eps_max
    if not (0.0 < lo < hi):
        raise InputError(f"need 0 < eps-min < eps-max, got [{lo}, {hi}]")
    eps_grid = np.linspace(lo, hi, points)
    eps, lhs_exact, lhs_expansion = eb_equation_curves(
        model, grid, eps_grid, mc_paths=mc_paths, seed=seed
    )
    save_eb_curves(eps, lhs_exact, lhs_expansion, out)
    click.echo(f"wrote {points} grid points on [{lo:.17g}, {hi:.17g}] to {out}")


if __name__ == "__main__":
    main()
