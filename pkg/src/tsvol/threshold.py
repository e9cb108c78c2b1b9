"""Approximations and solvers for the MSE-optimal truncation threshold.

The threshold minimizing the mean-square error of the truncated
realized variance solves

    eps^2 + 2 (n - 1) E[X_h^2 1{|X_h| <= eps}] - 2 T sigma^2 = 0.

Four routes to it live here: the closed-form first- and second-order
approximations, a root solve of the equation with E[..] replaced by its
three-term small-h expansion, and an "exact" solve where E[..] is
estimated by Monte Carlo under an exponential change of measure that
turns the tempered-stable jumps into one-sided stable ones.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import BracketError, InputError, NumericsError, ParameterError
from .models import LevyModelParams, SamplingGrid, eta_constant, gamma_tilde
from .seeding import derive_rng
from .stable import StableLaw, one_sided_scale, sample_stable

#: paths per simulation batch; bounds peak memory of the tilted sampler
MC_CHUNK = 1 << 20

_MIN_MC_PATHS = 1000


@dataclass(frozen=True)
class ThresholdInputs:
    """Model and grid quantities the threshold formulas depend on.

    t_horizon defaults to n * h; if supplied it must equal that product,
    since the root equations assume the grid covers the horizon exactly.
    """

    sigma2: float
    c_plus: float
    c_minus: float
    y: float
    h: float
    n: int
    t_horizon: float | None = None

    def __post_init__(self) -> None:
        if not (self.sigma2 > 0.0 and math.isfinite(self.sigma2)):
            raise ParameterError(f"sigma2 must be positive, got {self.sigma2}")
        if self.c_plus < 0.0 or self.c_minus < 0.0:
            raise ParameterError("jump intensities must be >= 0")
        if not (1.0 < self.y < 2.0):
            raise ParameterError(f"y must be in (1, 2), got {self.y}")
        if not (self.h > 0.0 and math.isfinite(self.h)):
            raise ParameterError(f"h must be positive, got {self.h}")
        if self.n < 2:
            raise ParameterError(f"n must be >= 2, got {self.n}")
        implied = self.n * self.h
        if self.t_horizon is None:
            object.__setattr__(self, "t_horizon", implied)
        elif abs(self.t_horizon - implied) > 1e-9 * implied:
            raise ParameterError(
                f"t_horizon = {self.t_horizon} is inconsistent with n * h = {implied}"
            )

    @property
    def c_bar(self) -> float:
        return 0.5 * (self.c_plus + self.c_minus)

    @classmethod
    def from_model(cls, params: LevyModelParams, grid: SamplingGrid) -> "ThresholdInputs":
        return cls(
            sigma2=params.sigma**2,
            c_plus=params.c_plus,
            c_minus=params.c_minus,
            y=params.y,
            h=grid.h,
            n=grid.n,
            t_horizon=grid.t_horizon,
        )


def expansion_Eb(eps, inputs: ThresholdInputs):
    """Three-term expansion of E[X_h^2 1{|X_h| <= eps}].

    sigma^2 h minus a Gaussian truncation correction plus the leading
    jump contribution. Valid when eps is a few multiples of sigma
    sqrt(h); no regime check is performed. Vectorized over eps.
    """
    eps_arr = np.asarray(eps, dtype=float)
    if np.any(eps_arr < 0.0) or np.any(np.isnan(eps_arr)):
        raise InputError("eps must be nonnegative")
    s2h = inputs.sigma2 * inputs.h
    sig = math.sqrt(inputs.sigma2)
    gauss = sig * eps_arr * math.sqrt(2.0 * inputs.h / math.pi) * np.exp(
        -(eps_arr**2) / (2.0 * s2h)
    )
    jump = (
        (inputs.c_plus + inputs.c_minus) / (2.0 - inputs.y) * inputs.h
    ) * eps_arr ** (2.0 - inputs.y)
    out = s2h - gauss + jump
    return float(out) if eps_arr.ndim == 0 else out


def _tilted_chunks(params: LevyModelParams, h: float, npaths: int, seed: int, chunk: int):
    """Yield (x, weight) batches of the change-of-measure representation.

    Under the sampling measure X_h = sigma W_h + Z+ + Z- + gamma_tilde h
    with Z+ and -Z- one-sided y-stable, and the importance weight
    exp(-m Z+ + g Z- - eta h) maps expectations back to the model. Draw
    order per batch: Gaussian (if sigma > 0), Z+ (if c_plus > 0), then
    Z- (if c_minus > 0).
    """
    eta_h = eta_constant(params) * h
    drift = gamma_tilde(params) * h
    law_plus = law_minus = None
    if params.c_plus > 0.0:
        law_plus = StableLaw(params.y, 1.0, one_sided_scale(params.c_plus, params.y, h))
    if params.c_minus > 0.0:
        law_minus = StableLaw(params.y, 1.0, one_sided_scale(params.c_minus, params.y, h))
    rng = derive_rng(seed)
    done = 0
    sig_sqrt_h = params.sigma * math.sqrt(h)
    while done < npaths:
        k = min(chunk, npaths - done)
        x = np.full(k, drift)
        if params.sigma > 0.0:
            x += sig_sqrt_h * rng.standard_normal(k)
        log_w = np.full(k, -eta_h)
        if law_plus is not None:
            zp = sample_stable(law_plus, rng, k)
            x += zp
            log_w -= params.m * zp
        if law_minus is not None:
            zm = -sample_stable(law_minus, rng, k)
            x += zm
            log_w += params.g * zm
        yield x, np.exp(log_w)
        done += k


def _sorted_prefix(x: np.ndarray, w: np.ndarray):
    # prefix sums of w x^2 and (w x^2)^2 ordered by |x|, for O(log)
    # evaluation of truncated moments at any threshold
    order = np.argsort(np.abs(x))
    ax = np.abs(x)[order]
    wx2 = w[order] * ax * ax
    return ax, np.cumsum(wx2), np.cumsum(wx2 * wx2)


def _prefix_at(ax, cs, eps):
    idx = np.searchsorted(ax, eps, side="right")
    return np.where(idx > 0, cs[np.maximum(idx - 1, 0)], 0.0)


def mc_Eb(
    params: LevyModelParams,
    h: float,
    eps,
    npaths: int,
    seed: int,
    chunk: int = MC_CHUNK,
):
    """Monte Carlo estimate of E[X_h^2 1{|X_h| <= eps}] with its SE.

    Uses the exponential tilting representation (see _tilted_chunks), so
    no small-jump truncation bias enters. eps may be a scalar or a 1-D
    array; all entries share the same draws (common random numbers), so
    differences across eps are far better resolved than the individual
    SEs suggest. Runs in batches; the batch size is part of the
    reproducibility contract for a given seed.
    """
    if not (h > 0.0 and math.isfinite(h)):
        raise InputError(f"h must be positive, got {h}")
    if npaths < _MIN_MC_PATHS:
        raise InputError(f"npaths must be >= {_MIN_MC_PATHS}, got {npaths}")
    eps_arr = np.atleast_1d(np.asarray(eps, dtype=float))
    if np.any(eps_arr < 0.0) or np.any(np.isnan(eps_arr)):
        raise InputError("eps must be nonnegative")
    s1 = np.zeros(eps_arr.shape)
    s2 = np.zeros(eps_arr.shape)
    for x, w in _tilted_chunks(params, h, npaths, seed, chunk):
        ax, c1, c2 = _sorted_prefix(x, w)
        s1 += _prefix_at(ax, c1, eps_arr)
        s2 += _prefix_at(ax, c2, eps_arr)
    est = s1 / npaths
    var = np.maximum(s2 / npaths - est**2, 0.0)
    se = np.sqrt(var / npaths)
    if np.ndim(eps) == 0:
        return float(est[0]), float(se[0])
    return est, se


def threshold_first_order(sigma2: float, y: float, h: float) -> float:
    """Leading-order optimal threshold sqrt((2-y) sigma2 h ln(1/h))."""
    _check_closed_form_domain(sigma2, y, h)
    return math.sqrt((2.0 - y) * sigma2 * h * math.log(1.0 / h))


def threshold_second_order(sigma2: float, c_bar: float, y: float, h: float) -> float:
    """Second-order threshold, adding the jump-intensity correction.

    sqrt((2-y) sigma2 h ln(1/h) + 2 sigma2 h ln((2-y) sigma / c_bar)).
    Raises BracketError when the expression under the root is not
    positive (c_bar overwhelming sigma); callers should then fall back
    to threshold_first_order.
    """
    _check_closed_form_domain(sigma2, y, h)
    if not (c_bar > 0.0 and math.isfinite(c_bar)):
        raise ParameterError(f"c_bar must be positive, got {c_bar}")
    sig = math.sqrt(sigma2)
    bracket = (2.0 - y) * sigma2 * h * math.log(1.0 / h) + 2.0 * sigma2 * h * math.log(
        (2.0 - y) * sig / c_bar
    )
    if bracket <= 0.0:
        raise BracketError(
            f"second-order bracket is {bracket:.6g} <= 0 "
            f"(c_bar = {c_bar} too large against sigma = {sig}); "
            "fall back to threshold_first_order"
        )
    return math.sqrt(bracket)


def _check_closed_form_domain(sigma2: float, y: float, h: float) -> None:
    if not (sigma2 > 0.0 and math.isfinite(sigma2)):
        raise ParameterError(f"sigma2 must be positive, got {sigma2}")
    if not (1.0 < y < 2.0):
        raise ParameterError(f"y must be in (1, 2), got {y}")
    if not (0.0 < h < 1.0):
        raise ParameterError(f"h must be in (0, 1), got {h}")


def _bisect_to_ulp(f, a: float, b: float) -> float:
    """Narrow a sign change down to adjacent floats; return the endpoint
    with the smaller |f|."""
    fa, fb = f(a), f(b)
    if fa == 0.0:
        return a
    if fb == 0.0:
        return b
    while True:
        mid = 0.5 * (a + b)
        if not (a < mid < b):
            break
        fm = f(mid)
        if fm == 0.0:
            return mid
        if (fm < 0.0) == (fa < 0.0):
            a, fa = mid, fm
        else:
            b, fb = mid, fm
    return a if abs(fa) <= abs(fb) else b


def solve_threshold_expansion(inputs: ThresholdInputs) -> float:
    """Root of the threshold equation with E[..] replaced by its
    three-term expansion.

    Scans a geometric grid for sign changes, refines each to float
    precision, and returns the root closest to threshold_second_order
    (the expansion produces spurious tiny roots where it is invalid).
    The scan starts at min(sqrt(h), threshold_first_order / 100):
    sqrt(h) alone sits above the root whenever sigma is well below 1.
    """
    sig2, y, h, n = inputs.sigma2, inputs.y, inputs.h, inputs.n
    c_bar = inputs.c_bar
    thr1 = threshold_first_order(sig2, y, h)
    try:
        ref = threshold_second_order(sig2, c_bar, y, h) if c_bar > 0 else thr1
    except BracketError:
        ref = thr1

    sig = math.sqrt(sig2)
    coef_gauss = 2.0 * (n - 1) * math.sqrt(2.0 / math.pi) * sig * math.sqrt(h)
    coef_jump = 2.0 * (n - 1) * 2.0 * c_bar / (2.0 - y) * h
    const = 2.0 * sig2 * h
    inv_2s2h = 1.0 / (2.0 * sig2 * h)

    def f(eps: float) -> float:
        return (
            eps * eps
            - coef_gauss * eps * math.exp(-eps * eps * inv_2s2h)
            + coef_jump * eps ** (2.0 - y)
            - const
        )

    lo = min(math.sqrt(h), 0.01 * thr1)
    hi = 20.0 * math.sqrt(sig2 * h * math.log(1.0 / h))
    grid = np.geomspace(lo, hi, 2001)
    vals = np.array([f(e) for e in grid])
    signs = np.sign(vals)
    crossings = np.where(signs[:-1] * signs[1:] < 0)[0]
    exact = np.where(vals == 0.0)[0]
    roots = [float(grid[i]) for i in exact]
    roots += [_bisect_to_ulp(f, float(grid[i]), float(grid[i + 1])) for i in crossings]
    if not roots:
        raise BracketError(
            "no sign change of the expansion equation on "
            f"[{lo:.6g}, {hi:.6g}]: f(lo) = {f(lo):.6g}, f(hi) = {f(hi):.6g}; "
            "the expansion has no meaningful root here, use "
            "threshold_second_order or threshold_first_order instead"
        )
    return min(roots, key=lambda r: abs(r - ref))


@dataclass(frozen=True)
class ExactMcThreshold:
    """Root of the Monte Carlo threshold equation with its uncertainty.

    eps_lo and eps_hi bound where the root could move if the estimated
    E[..] curve shifts by +-2 standard errors. When jumps are weak the
    equation is nearly flat past the Gaussian bulk and the band is
    honestly wide; it shrinks like 1/sqrt(npaths).
    """

    eps: float
    eps_lo: float
    eps_hi: float
    npaths: int


def solve_threshold_exact_mc(
    params: LevyModelParams,
    grid: SamplingGrid,
    npaths: int,
    seed: int,
    chunk: int = MC_CHUNK,
) -> ExactMcThreshold:
    """Solve the exact threshold equation with E[..] from tilted MC.

    All threshold evaluations reuse one stored sample (common random
    numbers), so the estimated equation is strictly increasing in eps
    and plain bisection is stable. Memory is about 16 bytes per path.
    """
    if params.sigma <= 0.0:
        raise ParameterError("solve_threshold_exact_mc needs sigma > 0")
    if npaths < _MIN_MC_PATHS:
        raise InputError(f"npaths must be >= {_MIN_MC_PATHS}, got {npaths}")
    h, n, t = grid.h, grid.n, grid.t_horizon
    if n < 2:
        raise ParameterError(f"need n >= 2 observations, got {n}")
    parts = list(zip(*_tilted_chunks(params, h, npaths, seed, chunk)))
    x = np.concatenate(parts[0])
    w = np.concatenate(parts[1])
    ax, c1, c2 = _sorted_prefix(x, w)

    sig2 = params.sigma**2
    scale = 2.0 * (n - 1)
    const = 2.0 * t * sig2

    def g(eps: float, shift: float = 0.0) -> float:
        eb = float(_prefix_at(ax, c1, eps)) / npaths
        return eps * eps + scale * eb - const + shift

    hi = 20.0 * math.sqrt(sig2 * h * math.log(1.0 / h)) if h < 1.0 else math.sqrt(const)
    lo = 0.0
    for _ in range(80):
        if g(hi) > 0.0:
            break
        hi *= 2.0
    else:
        raise NumericsError("threshold equation stayed negative; inputs degenerate")
    root = _bisect_to_ulp(lambda e: g(e), lo, hi)

    idx = int(np.searchsorted(ax, root, side="right"))
    eb = float(c1[idx - 1]) / npaths if idx > 0 else 0.0
    eb2 = float(c2[idx - 1]) / npaths if idx > 0 else 0.0
    se = math.sqrt(max(eb2 - eb * eb, 0.0) / npaths)
    dg = 2.0 * scale * se
    band_lo = _bisect_to_ulp(lambda e: g(e, +dg), lo, root) if g(lo, +dg) < 0 else lo
    hi_band = hi
    for _ in range(80):
        if g(hi_band, -dg) > 0.0:
            break
        hi_band *= 2.0
    else:
        raise NumericsError(
            "standard error too large to bracket the threshold; increase npaths"
        )
    band_hi = _bisect_to_ulp(lambda e: g(e, -dg), root, hi_band)
    return ExactMcThreshold(eps=root, eps_lo=band_lo, eps_hi=band_hi, npaths=npaths)
