"""Bounded derivative-free maximization used by the acquisition searches."""
from __future__ import annotations

import numpy as np
from scipy.optimize import minimize

SIMPLEX_STEP = 0.1


def _simplex(x0, lower, upper):
    width = upper - lower
    d = x0.size
    pts = np.tile(x0, (d + 1, 1))
    for k in range(d):
        step = SIMPLEX_STEP * width[k]
        # step inward when the start sits near the upper face
        pts[k + 1, k] += step if x0[k] + step <= upper[k] else -step
    return pts


def maximize_box(f, x0, lower, upper, max_evals=None):
    """Local maximum of ``f`` inside the box, by Nelder-Mead from ``x0``.

    Returns ``(x, f(x))``; never returns a point worse than ``x0``.
    """
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    x0 = np.clip(np.asarray(x0, dtype=float), lower, upper)
    d = x0.size
    f0 = f(x0)
    width = float(np.max(upper - lower))
    res = minimize(
        lambda x: -f(np.clip(x, lower, upper)),
        x0,
        method="Nelder-Mead",
        bounds=list(zip(lower, upper)),
        options={
            "initial_simplex": _simplex(x0, lower, upper),
            "xatol": 1e-7 * width,
            "fatol": 1e-14,
            "maxfev": max_evals or 200 * d + 100,
        },
    )
    x = np.clip(res.x, lower, upper)
    fx = f(x)
    if fx >= f0:
        return x, fx
    return x0, f0
