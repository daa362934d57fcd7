"""Student-t distribution function and the lower-tail paired t-test."""
from __future__ import annotations

import math

import numpy as np

from .distances import betainc_reg
from .errors import InvalidInputError

__all__ = ["paired_ttest", "t_cdf"]


def t_cdf(t, df):
    """CDF of Student's t with ``df`` degrees of freedom.

    Uses ``P(|T| > |t|) = I_x(df/2, 1/2)`` with ``x = df / (df + t^2)``.
    """
    if df <= 0:
        raise InvalidInputError("degrees of freedom must be positive")
    if math.isinf(t):
        return 1.0 if t > 0 else 0.0
    if t == 0.0:
        return 0.5
    tail = 0.5 * betainc_reg(0.5 * df, 0.5, df / (df + t * t))
    return 1.0 - tail if t > 0 else tail


def paired_ttest(x, y):
    """Lower-tail paired t-test of ``H1: mean(x - y) < 0``; returns the p-value.

    Small p means ``x`` tends to be smaller (better, for error metrics) than
    ``y``.  Differences with zero spread give 0 or 1 by the sign of their
    mean, and 0.5 when they are all zero.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise InvalidInputError("paired samples must be 1-d and of equal length")
    n = x.size
    if n < 2:
        raise InvalidInputError("need at least two pairs")
    diff = x - y
    mean = float(np.mean(diff))
    sd = float(np.std(diff, ddof=1))
    if sd == 0.0:
        if mean == 0.0:
            return 0.5
        return 0.0 if mean < 0 else 1.0
    return t_cdf(mean / (sd / math.sqrt(n)), n - 1)
