"""Truncated realized quadratic variation and pilot volatility estimators.

All outputs are annualized: the sum of kept squared increments is
divided by the horizon T of the sampling grid, in years.
"""

from __future__ import annotations

import math
from enum import Enum

import numpy as np

from .errors import InputError
from .models import IncrementSeries


class PilotVariant(str, Enum):
    """First-pass volatility estimators used to seed the pipeline.

    rv is the plain realized variance. The other three are truncated
    versions: p01 truncates at sqrt(h ln(1/h)); p00 scales that level by
    the realized variance; p02 scales it by the p00 output.
    """

    RV = "rv"
    P00 = "p00"
    P01 = "p01"
    P02 = "p02"


def trqv(series: IncrementSeries, eps: float) -> float:
    """Truncated realized variance at threshold eps.

    Sums squared increments whose modulus is at most eps (ties kept),
    divided by the horizon in years. eps = inf gives realized variance.
    """
    if not (eps >= 0.0):
        raise InputError(f"threshold must be nonnegative, got {eps}")
    x = series.values
    if math.isinf(eps):
        kept = x
    else:
        kept = x[np.abs(x) <= eps]
    return float(kept @ kept) / series.grid.t_horizon


def realized_variance(series: IncrementSeries) -> float:
    """Plain realized variance: trqv with an infinite threshold."""
    return trqv(series, math.inf)


def pilot_sigma(series: IncrementSeries, variant: PilotVariant | str) -> float:
    """Pilot variance estimate per the requested variant.

    Requires h < 1 (so ln(1/h) is positive) for the truncated variants.
    """
    variant = PilotVariant(variant)
    if variant is PilotVariant.RV:
        return realized_variance(series)
    h = series.grid.h
    if h >= 1.0:
        raise InputError(f"pilot truncation needs h < 1, got h = {h}")
    log_term = h * math.log(1.0 / h)
    if variant is PilotVariant.P01:
        return trqv(series, math.sqrt(log_term))
    rv = realized_variance(series)
    p00 = trqv(series, math.sqrt(2.0 * rv * log_term))
    if variant is PilotVariant.P00:
        return p00
    return trqv(series, math.sqrt(2.0 * p00 * log_term))
