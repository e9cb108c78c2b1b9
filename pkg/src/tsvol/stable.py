"""Stable-distribution primitives.

Sampling, characteristic functions, and the one-sided scale constant
used by the tilted-measure representation of a tempered-stable jump
part. Everything here works in the 1-parameterization: for alpha != 1
the characteristic function of a law with scale s, skewness b and
location d is

    E[exp(iuX)] = exp(iu d - s**alpha |u|**alpha (1 - i b tan(pi alpha/2) sgn u)).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError

# Pole guard for Gamma(-y): reject y this close to 1 or 2.
_POLE_TOL = 1e-6


@dataclass(frozen=True)
class StableLaw:
    """Parameters of a stable law in the 1-parameterization.

    alpha must lie in (0, 2] and away from 1 (the alpha = 1 branch has a
    different characteristic-function form and is not supported).
    """

    alpha: float
    beta: float
    scale: float
    location: float = 0.0

    def __post_init__(self) -> None:
        if not (0.0 < self.alpha <= 2.0):
            raise ParameterError(f"alpha must be in (0, 2], got {self.alpha}")
        if abs(self.alpha - 1.0) < _POLE_TOL:
            raise ParameterError("alpha = 1 is not supported")
        if not (-1.0 <= self.beta <= 1.0):
            raise ParameterError(f"beta must be in [-1, 1], got {self.beta}")
        if not (self.scale > 0.0 and math.isfinite(self.scale)):
            raise ParameterError(f"scale must be positive, got {self.scale}")
        if not math.isfinite(self.location):
            raise ParameterError("location must be finite")


def gamma_neg(y: float) -> float:
    """Gamma(-y) for y in (1, 2), via reflection from log-Gamma.

    Gamma(-y) = -pi / (sin(pi y) Gamma(1 + y)); positive on (1, 2).
    Values within 1e-6 of the poles at y = 1 and y = 2 are rejected.
    """
    if not (1.0 < y < 2.0):
        raise ParameterError(f"y must be in (1, 2), got {y}")
    if abs(y - 1.0) < _POLE_TOL or abs(y - 2.0) < _POLE_TOL:
        raise ParameterError(f"y = {y} is too close to a Gamma pole")
    return -math.pi / (math.sin(math.pi * y) * math.exp(math.lgamma(1.0 + y)))


def one_sided_scale(c: float, y: float, t: float) -> float:
    """Scale of the spectrally one-sided stable component over time t.

    Returns (c * |Gamma(-y) cos(pi y / 2)| * t)**(1/y), the scale of the
    strictly stable process with Levy density c x**(-1-y) on one side,
    accumulated over a horizon t.
    """
    if not (c > 0.0):
        raise ParameterError(f"c must be positive, got {c}")
    if not (t > 0.0):
        raise ParameterError(f"t must be positive, got {t}")
    g = gamma_neg(y)
    return (c * abs(g * math.cos(0.5 * math.pi * y)) * t) ** (1.0 / y)


def stable_cf(u, law: StableLaw):
    """Characteristic function of `law` at frequencies `u`.

    Accepts a scalar or array; returns complex values of matching shape.
    """
    u = np.asarray(u, dtype=float)
    tan_term = math.tan(0.5 * math.pi * law.alpha)
    au = np.abs(u)
    exponent = (
        1j * u * law.location
        - (law.scale ** law.alpha)
        * au ** law.alpha
        * (1.0 - 1j * law.beta * tan_term * np.sign(u))
    )
    out = np.exp(exponent)
    return complex(out) if out.ndim == 0 else out


def sample_stable(law: StableLaw, rng: np.random.Generator, size=None):
    """Draw stable variates by the Chambers-Mallows-Stuck transformation.

    With `size=None` returns a single float; otherwise an ndarray of the
    requested shape. The output law matches `stable_cf`.
    """
    scalar = size is None
    n = 1 if scalar else size
    u = rng.uniform(-0.5 * math.pi, 0.5 * math.pi, n)
    e = rng.standard_exponential(n)
    x = law.scale * _cms_standard(law.alpha, law.beta, u, e) + law.location
    return float(x[0]) if scalar else x


def _cms_standard(alpha: float, beta: float, u: np.ndarray, e: np.ndarray) -> np.ndarray:
    # Standard (scale 1, location 0) draw in the 1-parameterization.
    tan_half = math.tan(0.5 * math.pi * alpha)
    shift = math.atan(beta * tan_half) / alpha
    s0 = (1.0 + (beta * tan_half) ** 2) ** (1.0 / (2.0 * alpha))
    cos_u = np.cos(u)
    core = np.sin(alpha * (u + shift)) / cos_u ** (1.0 / alpha)
    tilt = (np.cos(u - alpha * (u + shift)) / e) ** ((1.0 - alpha) / alpha)
    return s0 * core * tilt
