"""Moment functions, Fourier model expectations, and the moment fit."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tsvol import (
    MomentSpec,
    NumericsError,
    OptimizerError,
    ParameterError,
    ThetaEstimate,
    empirical_moments,
    eval_moments,
    minimize,
    model_expectation,
    moment_objective,
    solve_fixed_sigma,
    tuning_frequency,
)
from tsvol.models import IncrementSeries, SamplingGrid
from tsvol.moments import _scaled_density, _weights

from _oracles import (
    gauss_moment_quad,
    gauss_truncated_second_moment,
    moment_parseval_quad,
)

H5 = 1.0 / 19656.0
U_REF = 157.648283302088  # tuning_frequency(0.04, H5)

# quadrature oracles for the pure-Gaussian density (jump intensity below
# double-precision resolution), sigma2=0.04, h=H5, u=U_REF
GAUSS_ORACLE = {
    "f1": 0.8431176165858622,
    "f2": 0.6864162064307012,
    "f3": 0.05056629685012619,
    "g1": 0.8205635208550442,
    "g2": 0.9494249845507253,
}

# frequency-side quadrature against the exact characteristic function
# (f2 has no elementary transform, so no entry for it)
PARSEVAL_A = {  # theta = (0.04, 0.028, 1.35)
    "f1": 0.8377607840516639,
    "f3": 0.054138414339989435,
    "g1": 0.8133485629702703,
    "g2": 0.9436850037882416,
}
PARSEVAL_B = {  # theta = (0.04, 0.028, 1.7)
    "f1": 0.7876803645048444,
    "f3": 0.09542883200770547,
    "g1": 0.7440123145745625,
    "g2": 0.8918292764403319,
}

# (sigma2, c, y, h, u) spanning the activity range, two grids, two scales
MC_CONFIGS = [
    (0.04, 0.028, 1.35, H5, U_REF),
    (0.04, 0.028, 1.5, H5, U_REF),
    (0.04, 0.028, 1.7, H5, U_REF),
    (0.16, 0.028, 1.7, H5, 78.824141651044),
    (0.01, 0.1, 1.35, 1e-05, 659.0102289822607),
    (0.04, 0.2, 1.5, 1.0175010175010176e-05, 326.9054907993045),
]

# (mean, standard error) of each moment over 10^6 draws of the
# Brownian-plus-symmetric-stable increment, seed derive_rng(424242, idx)
MC_ORACLE = [
    {"f1": (0.8376073583404033, 0.00011488314253708453),
     "f2": (0.6819749550945419, 0.00011633311011394701),
     "f3": (0.05419648581337124, 7.988221182118465e-05),
     "g1": (0.8131676908422185, 0.00014657829154870759),
     "g2": (0.9436085141866287, 9.12876175611198e-05)},
    {"f1": (0.8291354973617538, 0.00012347640655386403),
     "f2": (0.6750262148587799, 0.0001199970140205067),
     "f3": (0.06055622681276618, 9.198762949760538e-05),
     "g1": (0.801617338535191, 0.00016009238605404466),
     "g2": (0.9350147731872338, 0.00011106171597567728)},
    {"f1": (0.7878658010153057, 0.00015132381693122143),
     "f2": (0.641599125459517, 0.00013152229065299654),
     "f3": (0.09523451060256129, 0.0001384020854275824),
     "g1": (0.744296664371854, 0.00020627737951980644),
     "g2": (0.8920654893974385, 0.00017109909643584417)},
    {"f1": (0.8238475139850984, 0.00012437789678747737),
     "f2": (0.6701788635408966, 0.00012033986276466163),
     "f3": (0.06529432604328002, 9.697359551939779e-05),
     "g1": (0.7945026449568037, 0.0001627119835436843),
     "g2": (0.9312956739567202, 0.00011116179999177847)},
    {"f1": (0.826815122229905, 0.0001350357608742604),
     "f2": (0.6744866538390983, 0.0001254219587012635),
     "f3": (0.060583475151361664, 9.871696532637887e-05),
     "g1": (0.7983439924560986, 0.00017456907013321655),
     "g2": (0.9288605248486383, 0.0001375157479905325)},
    {"f1": (0.7955497834959712, 0.0001571171263736923),
     "f2": (0.6491264593886453, 0.00013495743992294985),
     "f3": (0.08442329497866397, 0.0001313818402875513),
     "g1": (0.7554107351961658, 0.000209700811862554),
     "g2": (0.896201705021336, 0.0001816298719378033)},
]

GAUSS_THETA = ThetaEstimate(sigma2=0.04, c=1e-300, y=1.35)
F_SPEC = MomentSpec(tag="f_set", scaling_u=U_REF)
G_SPEC = MomentSpec(tag="g_set", scaling_u=U_REF)


def _series(values, t_horizon=1.0):
    values = np.asarray(values, dtype=float)
    return IncrementSeries(values, SamplingGrid(len(values), t_horizon))


# ---------------------------------------------------------------- eval


def test_eval_at_zero():
    assert np.allclose(eval_moments(0.0, F_SPEC), [1.0, 1.0, 0.0])
    assert np.allclose(eval_moments(0.0, G_SPEC), [1.0, 1.0])


def test_eval_indicator_is_strict_at_one():
    f = eval_moments(1.0, F_SPEC)
    assert f[2] == 0.0
    assert np.all(eval_moments(1.0, G_SPEC) == 0.0)
    just_in = np.nextafter(1.0, 0.0)
    assert eval_moments(just_in, F_SPEC)[2] == pytest.approx(just_in**2)


def test_eval_worked_point():
    f = eval_moments(-0.5, F_SPEC)
    assert f[0] == pytest.approx(math.exp(-0.5), rel=1e-15)
    assert f[1] == pytest.approx(math.exp(-math.sqrt(0.5)), rel=1e-15)
    assert f[2] == pytest.approx(0.25, rel=1e-15)
    g = eval_moments(-0.5, G_SPEC)
    assert g[0] == pytest.approx(0.5, rel=1e-15)
    assert g[1] == pytest.approx(0.75, rel=1e-15)


def test_eval_vector_shape():
    x = np.array([-2.0, 0.0, 0.3])
    assert eval_moments(x, F_SPEC).shape == (3, 3)
    assert eval_moments(x, G_SPEC).shape == (2, 3)


@given(st.floats(min_value=-1e300, max_value=1e300, allow_nan=False))
@settings(max_examples=200, deadline=None)
def test_eval_even_bounded(x):
    for spec in (F_SPEC, G_SPEC):
        v = eval_moments(x, spec)
        assert np.array_equal(v, eval_moments(-x, spec))
        assert np.all(v >= 0.0) and np.all(v <= 1.0)
        if abs(x) >= 1.0 and spec.tag == "g_set":
            assert np.all(v == 0.0)


def test_moment_spec_validation():
    with pytest.raises(ParameterError):
        MomentSpec(tag="h_set", scaling_u=1.0)
    with pytest.raises(ParameterError):
        MomentSpec(tag="f_set", scaling_u=0.0)


def test_theta_validation():
    with pytest.raises(ParameterError):
        ThetaEstimate(sigma2=-0.1, c=0.1, y=1.5)
    with pytest.raises(ParameterError):
        ThetaEstimate(sigma2=0.04, c=0.0, y=1.5)
    with pytest.raises(ParameterError):
        ThetaEstimate(sigma2=0.04, c=0.1, y=2.0)
    with pytest.raises(ParameterError):
        ThetaEstimate(sigma2=0.04, c=0.1, y=1.0)


# ------------------------------------------------------ tuning frequency


def test_tuning_frequency_formula():
    h = H5
    want = 1.0 / math.sqrt(2.0 * 0.04 * h * math.log(1.0 / h))
    assert tuning_frequency(0.04, h) == pytest.approx(want, rel=1e-15)
    assert tuning_frequency(0.04, h) == pytest.approx(U_REF, rel=1e-13)


def test_tuning_frequency_validation():
    with pytest.raises(ParameterError):
        tuning_frequency(0.0, H5)
    with pytest.raises(ParameterError):
        tuning_frequency(0.04, 1.0)
    with pytest.raises(ParameterError):
        tuning_frequency(0.04, 0.0)


# --------------------------------------------------- model expectations


def test_gaussian_case_matches_quadrature():
    f = model_expectation(F_SPEC, GAUSS_THETA, H5)
    g = model_expectation(G_SPEC, GAUSS_THETA, H5)
    assert f[0] == pytest.approx(GAUSS_ORACLE["f1"], abs=1e-7)
    assert f[1] == pytest.approx(GAUSS_ORACLE["f2"], abs=1e-6)
    assert f[2] == pytest.approx(GAUSS_ORACLE["f3"], abs=1e-7)
    assert g[0] == pytest.approx(GAUSS_ORACLE["g1"], abs=1e-7)
    assert g[1] == pytest.approx(GAUSS_ORACLE["g2"], abs=1e-7)


def test_gaussian_truncated_second_moment_closed_form():
    # the x^2 moment against the exact Gaussian truncated second moment
    s = U_REF * math.sqrt(0.04 * H5)
    want = gauss_truncated_second_moment(s, 1.0)
    got = model_expectation(F_SPEC, GAUSS_THETA, H5)[2]
    assert got == pytest.approx(want, abs=1e-8)


def test_gaussian_oracles_are_current():
    # regenerate the frozen quadrature values; guards against drift in
    # the oracle helpers themselves
    s = U_REF * math.sqrt(0.04 * H5)
    fns = {
        "f1": lambda x: math.exp(-abs(x)),
        "f2": lambda x: math.exp(-math.sqrt(abs(x))),
        "f3": lambda x: x * x * (abs(x) < 1.0),
        "g1": lambda x: (1 - abs(x)) * (abs(x) < 1.0),
        "g2": lambda x: (1 - x * x) * (abs(x) < 1.0),
    }
    for k, fn in fns.items():
        assert gauss_moment_quad(fn, s) == pytest.approx(GAUSS_ORACLE[k], abs=1e-9)


@pytest.mark.parametrize(
    "theta,oracle",
    [
        (ThetaEstimate(sigma2=0.04, c=0.028, y=1.35), PARSEVAL_A),
        (ThetaEstimate(sigma2=0.04, c=0.028, y=1.7), PARSEVAL_B),
    ],
)
def test_jump_case_matches_frequency_quadrature(theta, oracle):
    f = model_expectation(F_SPEC, theta, H5)
    g = model_expectation(G_SPEC, theta, H5)
    assert f[0] == pytest.approx(oracle["f1"], abs=1e-6)
    assert f[2] == pytest.approx(oracle["f3"], abs=1e-6)
    assert g[0] == pytest.approx(oracle["g1"], abs=1e-6)
    assert g[1] == pytest.approx(oracle["g2"], abs=1e-6)


def test_parseval_oracles_are_current():
    for k in ("f1", "f3"):
        assert moment_parseval_quad(k, 0.04, 0.028, 1.35, H5, U_REF) == pytest.approx(
            PARSEVAL_A[k], abs=1e-9
        )
    for k in ("g1", "g2"):
        assert moment_parseval_quad(k, 0.04, 0.028, 1.7, H5, U_REF) == pytest.approx(
            PARSEVAL_B[k], abs=1e-9
        )


@pytest.mark.parametrize("idx", range(len(MC_CONFIGS)))
def test_model_expectation_within_mc_error(idx):
    sigma2, c, y, h, u = MC_CONFIGS[idx]
    theta = ThetaEstimate(sigma2=sigma2, c=c, y=y)
    f = model_expectation(MomentSpec(tag="f_set", scaling_u=u), theta, h)
    g = model_expectation(MomentSpec(tag="g_set", scaling_u=u), theta, h)
    got = {"f1": f[0], "f2": f[1], "f3": f[2], "g1": g[0], "g2": g[1]}
    for name, (mean, se) in MC_ORACLE[idx].items():
        assert abs(got[name] - mean) < 3.0 * se, (idx, name, got[name], mean, se)


def test_small_u_limit_is_degenerate_moments():
    # u -> 0 concentrates u * Z at zero, so f -> (1, 1, 0); below the
    # representable range the engine refuses rather than extrapolates
    theta = ThetaEstimate(sigma2=0.04, c=0.028, y=1.35)
    vals = []
    for u in (U_REF, 20.0, 5.0, 1.0):
        vals.append(model_expectation(MomentSpec(tag="f_set", scaling_u=u), theta, H5))
    vals = np.array(vals)
    assert np.all(np.diff(vals[:, 0]) > 0) and np.all(np.diff(vals[:, 1]) > 0)
    assert np.all(np.diff(vals[:, 2]) < 0)
    assert vals[-1, 0] > 0.998 and vals[-1, 1] > 0.96 and vals[-1, 2] < 1e-4
    with pytest.raises(NumericsError):
        model_expectation(MomentSpec(tag="f_set", scaling_u=1e-4), theta, H5)


def test_density_normalizes_exactly():
    # the DFT of characteristic-function samples is the exactly
    # periodized density, so the rectangle sum is exactly 1
    for args in [(0.04, 0.028, 1.35, U_REF, H5), (0.16, 0.2, 1.7, 50.0, 1e-5)]:
        p, dz, half_m = _scaled_density(*args)
        assert dz * float(p.sum()) == pytest.approx(1.0, abs=1e-14)
        assert p[half_m] == p.max()


def test_model_expectation_validates_h():
    with pytest.raises(ParameterError):
        model_expectation(F_SPEC, GAUSS_THETA, 0.0)
    with pytest.raises(ParameterError):
        model_expectation(F_SPEC, GAUSS_THETA, math.inf)


# ----------------------------------------------------- empirical moments


def test_empirical_constant_zero_series():
    s = _series(np.zeros(50))
    assert np.allclose(empirical_moments(s, F_SPEC), [1.0, 1.0, 0.0])


def test_empirical_single_increment():
    s = _series([0.5], t_horizon=0.1)
    spec = MomentSpec(tag="f_set", scaling_u=1.0)
    assert np.array_equal(empirical_moments(s, spec), eval_moments(0.5, spec).ravel())


def test_empirical_concatenation_linearity():
    rng = np.random.default_rng(11)
    a, b = rng.normal(size=300) * 0.01, rng.normal(size=700) * 0.01
    ma = empirical_moments(_series(a), F_SPEC)
    mb = empirical_moments(_series(b), F_SPEC)
    mab = empirical_moments(_series(np.concatenate([a, b])), F_SPEC)
    assert np.allclose(mab, 0.3 * ma + 0.7 * mb, rtol=1e-12)


def test_f3_bridge_to_truncated_variance():
    # (1/n) sum f3(u dx) == (u^2/n) sum dx^2 1{|dx| < 1/u}, exactly
    rng = np.random.default_rng(23)
    dx = rng.standard_t(df=3, size=4000) * 0.01
    u = 37.5
    s = _series(dx)
    lhs = empirical_moments(s, MomentSpec(tag="f_set", scaling_u=u))[2]
    rhs = u * u / dx.size * float(np.sum(dx * dx * (np.abs(dx) < 1.0 / u)))
    assert lhs == pytest.approx(rhs, rel=1e-14)


# ------------------------------------------------------------- objective


def test_objective_is_weighted_squared_residual():
    rng = np.random.default_rng(3)
    s = _series(rng.normal(size=2000) * 0.012)
    theta = ThetaEstimate(sigma2=0.04, c=0.028, y=1.35)
    got = moment_objective(theta, s, F_SPEC)
    # same arithmetic as the implementation, recomputed here
    h = s.grid.h
    res = empirical_moments(s, F_SPEC) - model_expectation(F_SPEC, theta, h)
    w = _weights(F_SPEC, theta.y, h)
    assert got == pytest.approx(float(np.sum((res / w) ** 2)), rel=1e-12)
    assert got >= 0.0


def test_objective_zero_when_moments_agree(monkeypatch):
    import tsvol.moments as m

    rng = np.random.default_rng(4)
    s = _series(rng.normal(size=500) * 0.01)
    target = empirical_moments(s, F_SPEC)
    monkeypatch.setattr(m, "model_expectation", lambda spec, theta, h: target.copy())
    theta = ThetaEstimate(sigma2=0.04, c=0.028, y=1.35)
    assert moment_objective(theta, s, F_SPEC) == 0.0


def test_objective_nonnegative_on_random_grid():
    rng = np.random.default_rng(7)
    s = _series(rng.normal(size=800) * 0.0014, t_horizon=800 * H5)
    for _ in range(10):
        theta = ThetaEstimate(
            sigma2=float(rng.uniform(0.01, 0.09)),
            c=float(rng.uniform(0.005, 0.1)),
            y=float(rng.uniform(1.05, 1.9)),
        )
        assert moment_objective(theta, s, F_SPEC) >= 0.0


def _noiseless_objective(theta0, spec, h):
    target = model_expectation(spec, theta0, h)

    def objective(theta):
        res = target - model_expectation(spec, theta, h)
        w = _weights(spec, theta.y, h)
        return float(np.sum((res / w) ** 2))

    return objective


def test_noiseless_objective_minimal_at_truth():
    theta0 = ThetaEstimate(sigma2=0.04, c=0.028, y=1.35)
    obj = _noiseless_objective(theta0, F_SPEC, H5)
    v0 = obj(theta0)
    assert v0 == 0.0
    rng = np.random.default_rng(9)
    for _ in range(100):
        pert = ThetaEstimate(
            sigma2=0.04 * float(rng.uniform(0.8, 1.2)),
            c=0.028 * float(rng.uniform(0.8, 1.2)),
            y=1.35 * float(rng.uniform(0.8, 1.2)),
        )
        if (pert.sigma2, pert.c, pert.y) == (0.04, 0.028, 1.35):
            continue
        assert obj(pert) > v0


# ------------------------------------------------------------- minimizer


def test_minimize_quadratic_bowl():
    t_star = np.array([math.log(0.05), math.log(0.07), 0.4])

    def bowl(theta):
        t = np.array([math.log(theta.sigma2), math.log(theta.c),
                      math.log((theta.y - 1.0) / (2.0 - theta.y))])
        return float(np.sum((t - t_star) ** 2))

    init = ThetaEstimate(sigma2=0.03, c=0.1, y=1.4)
    out = minimize(bowl, init)
    assert out.sigma2 == pytest.approx(0.05, abs=1e-6)
    assert out.c == pytest.approx(0.07, abs=1e-6)
    assert out.y == pytest.approx(1.0 + 1.0 / (1.0 + math.exp(-0.4)), abs=1e-6)
    assert out.converged


def test_minimize_rosenbrock():
    # banana valley in the transformed coordinates, minimum at t = (1,1,1)
    def rosen(theta):
        t = np.array([math.log(theta.sigma2), math.log(theta.c),
                      math.log((theta.y - 1.0) / (2.0 - theta.y))])
        return float(
            100.0 * (t[1] - t[0] ** 2) ** 2
            + (1.0 - t[0]) ** 2
            + 100.0 * (t[2] - t[1] ** 2) ** 2
            + (1.0 - t[1]) ** 2
        )

    init = ThetaEstimate(sigma2=1.5, c=1.5, y=1.6)
    out = minimize(rosen, init, maxiter=2000)
    assert out.sigma2 == pytest.approx(math.e, rel=1e-4)
    assert out.c == pytest.approx(math.e, rel=1e-4)
    assert out.y == pytest.approx(1.0 + 1.0 / (1.0 + math.exp(-1.0)), rel=1e-4)


def test_minimize_recovers_noiseless_moments():
    theta0 = ThetaEstimate(sigma2=0.04, c=0.028, y=1.35)
    obj = _noiseless_objective(theta0, F_SPEC, H5)
    init = ThetaEstimate(sigma2=0.05, c=0.1, y=1.3)
    out = minimize(obj, init)
    assert out.sigma2 == pytest.approx(0.04, rel=0.01)
    assert out.c == pytest.approx(0.028, rel=0.01)
    assert out.y == pytest.approx(1.35, rel=0.01)


def test_weight_rescaling_keeps_argmin():
    theta0 = ThetaEstimate(sigma2=0.04, c=0.028, y=1.35)
    obj = _noiseless_objective(theta0, F_SPEC, H5)
    scaled = lambda theta: 7.25 * obj(theta)
    init = ThetaEstimate(sigma2=0.05, c=0.1, y=1.3)
    a, b = minimize(obj, init), minimize(scaled, init)
    assert a.sigma2 == pytest.approx(b.sigma2, rel=1e-5)
    assert a.c == pytest.approx(b.c, rel=1e-4)
    assert a.y == pytest.approx(b.y, rel=1e-5)


def test_minimize_rejects_bad_init():
    with pytest.raises(OptimizerError):
        minimize(lambda theta: math.nan, ThetaEstimate(sigma2=0.04, c=0.03, y=1.4))


def test_minimize_reports_diagnostics():
    out = minimize(
        lambda th: (math.log(th.sigma2) - 1.0) ** 2,
        ThetaEstimate(sigma2=0.04, c=0.03, y=1.4),
        maxiter=3,
    )
    assert not out.converged
    assert out.iterations == 3
    assert out.objective_value >= 0.0


# -------------------------------------------------------- fixed-sigma fit


def test_solve_fixed_sigma_recovers_noiseless_target(monkeypatch):
    import tsvol.moments as m

    # replace the sample moments by exact model values at the target
    sigma2, h = 0.04, H5
    u = tuning_frequency(sigma2, h)
    spec = MomentSpec(tag="g_set", scaling_u=u)
    target = model_expectation(spec, ThetaEstimate(sigma2=sigma2, c=0.028, y=1.35), h)
    monkeypatch.setattr(m, "empirical_moments", lambda series, sp: target.copy())
    s = _series(np.zeros(100), t_horizon=100 * h)  # grid step matches the target's h
    out = solve_fixed_sigma(s, sigma2, (0.1, 1.3))
    assert out.sigma2 == sigma2
    assert out.c == pytest.approx(0.028, rel=0.01)
    assert out.y == pytest.approx(1.35, rel=0.01)


def test_solve_fixed_sigma_deterministic():
    rng = np.random.default_rng(31)
    s = _series(rng.normal(size=3000) * 0.012)
    a = solve_fixed_sigma(s, 0.04, (0.1, 1.3))
    b = solve_fixed_sigma(s, 0.04, (0.1, 1.3))
    assert (a.sigma2, a.c, a.y, a.objective_value) == (b.sigma2, b.c, b.y, b.objective_value)


def test_solve_fixed_sigma_validates_sigma():
    s = _series(np.zeros(10))
    with pytest.raises(ParameterError):
        solve_fixed_sigma(s, 0.0, (0.1, 1.3))
