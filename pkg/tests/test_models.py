"""Tests for the CGMY model layer: constants, CF, simulators, CSV io."""

import math

import numpy as np
import pytest
from scipy import stats

from tsvol import (
    HestonParams,
    IncrementSeries,
    InputError,
    LevyModelParams,
    ParameterError,
    SamplingGrid,
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

from _oracles import (
    cf_exponent_quad,
    eta_quad,
    gamma_tilde_quad,
    jump_tail_mass_quad,
    small_jump_variance_quad,
    tail_mean_quad,
)

BASE = LevyModelParams(sigma=0.2, c_plus=0.028, c_minus=0.028, y=1.35, g=2.318, m=4.025)

# Frozen golden values (30-digit evaluation of the closed forms).
ETA_GOLDEN = {1.35: 0.7930406394367069, 1.5: 0.76787305566890411, 1.7: 1.044854118713102}
GAMMA_GOLDEN = {1.35: 0.031677054301170709, 1.5: 0.04801501225811079, 1.7: 0.10162698372116237}


def _params(y, **kw):
    base = dict(sigma=0.2, c_plus=0.028, c_minus=0.028, y=y, g=2.318, m=4.025)
    base.update(kw)
    return LevyModelParams(**base)


def test_params_validation():
    with pytest.raises(ParameterError):
        _params(1.35, sigma=-0.1)
    with pytest.raises(ParameterError):
        _params(2.3)
    with pytest.raises(ParameterError):
        _params(1.35, c_plus=-1.0)
    with pytest.raises(ParameterError):
        _params(1.35, g=0.0)
    with pytest.raises(ParameterError):
        _params(1.35, drift_convention="martingale")


def test_grid_and_series_validation():
    with pytest.raises(ParameterError):
        SamplingGrid(n=0, t_horizon=1.0)
    with pytest.raises(ParameterError):
        SamplingGrid(n=10, t_horizon=0.0)
    grid = SamplingGrid(n=3, t_horizon=1.0)
    with pytest.raises(InputError):
        IncrementSeries(np.zeros(4), grid)
    assert SamplingGrid(n=19656, t_horizon=1.0).h == 1.0 / 19656


def test_eta_golden_and_quadrature():
    for y, ref in ETA_GOLDEN.items():
        assert eta_constant(_params(y)) == pytest.approx(ref, rel=1e-14)
    assert eta_constant(BASE) == pytest.approx(eta_quad(BASE), rel=1e-8)


def test_eta_limits_and_monotonicity():
    tiny = _params(1.35, c_plus=1e-12, c_minus=1e-12)
    assert eta_constant(tiny) < 1e-10
    assert eta_constant(_params(1.35, m=5.0)) > eta_constant(_params(1.35, m=4.025))
    none = _params(1.35, c_plus=0.0, c_minus=0.0)
    assert eta_constant(none) == 0.0


def test_gamma_tilde_golden_and_quadrature():
    for y, ref in GAMMA_GOLDEN.items():
        assert gamma_tilde(_params(y)) == pytest.approx(ref, rel=1e-14)
    assert gamma_tilde(BASE) == pytest.approx(gamma_tilde_quad(BASE), rel=1e-8)


def test_gamma_tilde_symmetry_and_sign():
    sym = _params(1.5, g=3.0, m=3.0)
    assert gamma_tilde(sym) == 0.0
    # m > g tempers the positive side harder, so the tilted mean is positive
    assert gamma_tilde(_params(1.5)) > 0.0


@pytest.mark.parametrize("c", [0.014, 0.028, 0.1])
@pytest.mark.parametrize("y", [1.35, 1.5, 1.7])
@pytest.mark.parametrize("gm", [(3.0, 3.0), (2.318, 4.025), (6.0, 2.5)])
def test_tilting_constants_quadrature_grid(c, y, gm):
    g, m = gm
    p = LevyModelParams(sigma=0.1, c_plus=c, c_minus=c, y=y, g=g, m=m)
    assert eta_constant(p) == pytest.approx(eta_quad(p), rel=1e-8)
    ref = gamma_tilde_quad(p)
    if g == m:
        assert abs(gamma_tilde(p)) < 1e-12
        assert abs(ref) < 1e-10
    else:
        assert gamma_tilde(p) == pytest.approx(ref, rel=1e-8)


def test_gamma_tilde_explicit_branch_consistency():
    # With b chosen so that E[X_t] = 0, the explicit-drift branch must
    # reproduce the zero-mean closed form.
    b = -tail_mean_quad(BASE)
    p = _params(1.35, drift_convention="explicit", b=b)
    assert gamma_tilde(p) == pytest.approx(gamma_tilde(BASE), rel=1e-9)


def test_cf_normalization_and_symmetry():
    assert cgmy_cf(0.0, BASE, 1.0) == 1.0 + 0.0j
    sym = _params(1.5, g=3.0, m=3.0)
    u = np.linspace(-8.0, 8.0, 81)
    vals = cgmy_cf(u, sym, 0.5)
    assert np.max(np.abs(vals.imag)) < 1e-15
    assert np.allclose(vals, vals[::-1])


def test_cf_matches_levy_khintchine_quadrature():
    p = _params(1.35, sigma=0.0)
    for u in (1.0, 3.0):
        ref = np.exp(cf_exponent_quad(u, p))
        got = cgmy_cf(u, p, 1.0)
        assert abs(got - ref) / abs(ref) < 1e-6


def test_cf_explicit_drift_shifts_mean():
    p = _params(1.35, drift_convention="explicit", b=0.5)
    du = 1e-4
    mean = (cgmy_cf(du, p, 1.0) - cgmy_cf(-du, p, 1.0)).imag / (2.0 * du)
    assert mean == pytest.approx(0.5 + tail_mean_quad(p), rel=1e-4)


def test_small_and_big_jump_splits_match_quadrature():
    for delta in (1e-3, 1e-2):
        assert small_jump_variance(BASE, delta) == pytest.approx(
            small_jump_variance_quad(BASE, delta), rel=1e-9
        )
        assert big_jump_mean(BASE, delta) == pytest.approx(
            tail_mean_quad(BASE, delta), rel=1e-9
        )


def test_simulate_pure_gaussian_degeneracy():
    p = _params(1.35, c_plus=0.0, c_minus=0.0)
    grid = SamplingGrid(n=100_000, t_horizon=100_000 / 19656)
    s = simulate_cgmy_increments(p, grid, seed=1)
    assert s.values.var() == pytest.approx(0.04 * grid.h, rel=0.03)


def test_simulate_deterministic_and_seed_sensitivity():
    grid = SamplingGrid(n=20_000, t_horizon=20_000 / 19656)
    a = simulate_cgmy_increments(BASE, grid, seed=5)
    b = simulate_cgmy_increments(BASE, grid, seed=5)
    c = simulate_cgmy_increments(BASE, grid, seed=6)
    assert np.array_equal(a.values, b.values)
    assert not np.array_equal(a.values, c.values)
    assert stats.ks_2samp(a.values, c.values).pvalue > 0.01


def test_simulate_rejects_bad_delta():
    grid = SamplingGrid(n=10, t_horizon=1.0)
    with pytest.raises(InputError):
        simulate_cgmy_increments(BASE, grid, seed=1, delta=0.0)


def test_simulated_cf_matches_model_cf():
    # Empirical CF of 1e5 increments vs the closed form, within 3 MC
    # standard errors at each frequency.
    grid = SamplingGrid(n=100_000, t_horizon=100_000 / 19656)
    s = simulate_cgmy_increments(BASE, grid, seed=7)
    x, h, n = s.values, grid.h, grid.n
    for u in (50.0, 100.0, 200.0, 400.0):
        target = cgmy_cf(u, BASE, h)
        cos_part, sin_part = np.cos(u * x), np.sin(u * x)
        assert abs(cos_part.mean() - target.real) < 3.0 * cos_part.std(ddof=1) / math.sqrt(n)
        assert abs(sin_part.mean() - target.imag) < 3.0 * sin_part.std(ddof=1) / math.sqrt(n)


def test_big_jump_counts_are_poisson():
    # On a pure-jump path, increments exceeding 0.1 in modulus mark jumps
    # larger than 0.1; their count per path is Poisson with rate
    # T * (jump mass above 0.1).
    p = _params(1.35, sigma=0.0)
    grid = SamplingGrid(n=19656, t_horizon=1.0)
    counts = []
    for i in range(200):
        s = simulate_cgmy_increments(p, grid, seed=1000 + i)
        counts.append(int(np.sum(np.abs(s.values) > 0.1)))
    counts = np.asarray(counts, dtype=float)
    target = grid.t_horizon * jump_tail_mass_quad(p, 0.1)
    se = counts.std(ddof=1) / math.sqrt(len(counts))
    assert abs(counts.mean() - target) < 3.0 * se


def test_heston_deterministic_variance():
    sv = HestonParams(kappa=5.0, xi=0.0, theta=0.16, v0=0.16)
    jp = _params(1.7, sigma=0.0)
    grid = SamplingGrid(n=252 * 78, t_horizon=1.0)
    path = simulate_heston_cgmy(sv, jp, grid, seed=3)
    assert np.all(path.spot_variance == 0.16)
    day = 1.0 / 252.0
    assert path.true_iv(0.0, day) == pytest.approx(0.16 / 252.0, rel=1e-13)


def test_heston_long_run_mean():
    # Stationary start: the time average of V over 4 years should sit at
    # theta within 3 standard errors across 100 paths.
    sv = HestonParams(kappa=5.0, xi=0.5, theta=0.16, v0=0.16)
    jp = _params(1.35, c_plus=0.0, c_minus=0.0, sigma=0.0)
    grid = SamplingGrid(n=4 * 2016, t_horizon=4.0)
    means = [
        simulate_heston_cgmy(sv, jp, grid, seed=40 + i).spot_variance.mean()
        for i in range(100)
    ]
    means = np.asarray(means)
    se = means.std(ddof=1) / math.sqrt(len(means))
    assert abs(means.mean() - 0.16) < 3.0 * se


def test_heston_full_truncation_never_negative():
    sv = HestonParams(kappa=5.0, xi=1.2, theta=0.02, v0=0.001)
    jp = _params(1.5, c_plus=0.0, c_minus=0.0, sigma=0.0)
    grid = SamplingGrid(n=50_000, t_horizon=1.0)
    path = simulate_heston_cgmy(sv, jp, grid, seed=11)
    assert np.all(np.isfinite(path.spot_variance))
    assert np.all(path.spot_variance >= 0.0)
    assert np.all(np.isfinite(path.increments.values))


def test_heston_iv_additivity_and_bounds():
    sv = HestonParams(kappa=5.0, xi=0.5, theta=0.16, v0=0.16)
    jp = _params(1.7, sigma=0.0)
    grid = SamplingGrid(n=252 * 78, t_horizon=1.0)
    path = simulate_heston_cgmy(sv, jp, grid, seed=17)
    day = 1.0 / 252.0
    total = path.true_iv(0.0, 1.0)
    daily = [path.true_iv(k * day, (k + 1) * day) for k in range(252)]
    assert abs(sum(daily) - total) <= 1e-14 * total
    with pytest.raises(InputError):
        path.true_iv(0.0, 1.5)
    with pytest.raises(InputError):
        path.true_iv(0.7 * grid.h, day)


def test_increment_csv_roundtrip(tmp_path):
    grid = SamplingGrid(n=1000, t_horizon=1000 / 19656)
    s = simulate_cgmy_increments(BASE, grid, seed=21)
    out = tmp_path / "inc.csv"
    save_increments(s, str(out))
    header = out.read_text().splitlines()[0]
    assert header == "i,increment"
    loaded = load_increments(str(out), t_horizon=grid.t_horizon)
    assert np.array_equal(loaded.values, s.values)
    assert loaded.grid == grid


def test_load_increments_rejects_bad_header(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("a,b\n0,1.0\n")
    with pytest.raises(InputError):
        load_increments(str(bad), t_horizon=1.0)
