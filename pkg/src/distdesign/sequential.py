"""Sequential design loops: variance-seeking (ALM) and expected improvement.

Both loops start from a space-filling design, condition a GP on the
responses, and add one point at a time.  ALM refits the lengthscale and
nugget after every acquisition; the EI loop fixes the lengthscale estimated
from the initial design and only re-profiles the amplitude.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from . import gp
from ._rng import seed_sequence
from .errors import InvalidInputError
from .optim import maximize_box
from .tuner import ei_scalar

__all__ = [
    "GL_BOX",
    "SeqState",
    "SeqTrace",
    "alm_step",
    "ei_step",
    "gramacy_lee",
    "griewank",
    "maximin_starts",
    "run_alm",
    "run_bo",
]

GL_BOX = (-2.0, 4.0)
POOL_SIZE = 512
ALM_STARTS = 5
EI_STARTS = 4
GRID_SIDE = 100
EVERY_STEP = "every-step"
FREEZE = "freeze-after-init"


def gramacy_lee(X):
    """``x1 * exp(-x1^2 - x2^2)``, evaluated row-wise."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    return X[:, 0] * np.exp(-X[:, 0] ** 2 - X[:, 1] ** 2)


def griewank(X):
    """Griewank function ``sum x^2/4000 - prod cos(x_i/sqrt(i)) + 1``, row-wise."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    i = np.arange(1, X.shape[1] + 1)
    return np.sum(X**2, axis=1) / 4000.0 - np.prod(np.cos(X / np.sqrt(i)), axis=1) + 1.0


@dataclass(frozen=True)
class SeqState:
    """Everything a sequential loop carries between acquisitions.

    ``X``/``y`` are the history in acquisition order and always match the
    model's training data.  ``info`` describes the last acquisition.
    """

    model: gp.GpModel
    X: np.ndarray
    y: np.ndarray
    objective: Callable
    lower: np.ndarray
    upper: np.ndarray
    refit_policy: str = EVERY_STEP
    theta_bounds: tuple = (gp.SQRT_EPS, 1.0)
    with_nugget: bool = True
    info: dict = field(default_factory=dict)

    @property
    def history(self):
        return list(zip(self.X, self.y))

    @property
    def n(self):
        return self.X.shape[0]


def make_state(X, y, objective, lower, upper, refit_policy=EVERY_STEP, theta_bounds=None,
               with_nugget=True):
    """Fit the initial model and wrap it in a :class:`SeqState`."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    lower = np.broadcast_to(np.asarray(lower, dtype=float), (X.shape[1],)).copy()
    upper = np.broadcast_to(np.asarray(upper, dtype=float), (X.shape[1],)).copy()
    if theta_bounds is None:
        theta_bounds = (gp.SQRT_EPS, math.sqrt(X.shape[1]))
    kernel = gp.mle_theta(X, y, bounds=theta_bounds, with_nugget=with_nugget)
    model = gp.GpModel.fit(X, y, kernel)
    return SeqState(model, X, y, objective, lower, upper, refit_policy, tuple(theta_bounds),
                    with_nugget)


def _refit(state, X, y):
    if state.refit_policy == FREEZE:
        k = state.model.kernel
        return gp.GpModel.fit_profile(X, y, k.theta, k.g)
    # cold start each time: warm starts can stall on the flat small-theta plateau
    kernel = gp.mle_theta(X, y, bounds=state.theta_bounds, with_nugget=state.with_nugget)
    return gp.GpModel.fit(X, y, kernel)


def _advance(state, x_next, info):
    y_next = float(np.asarray(state.objective(x_next)).reshape(-1)[0])
    X = np.vstack([state.X, x_next])
    y = np.append(state.y, y_next)
    return replace(state, model=_refit(state, X, y), X=X, y=y, info=info)


def maximin_starts(X, lower, upper, k, rng, pool_size=POOL_SIZE):
    """Pick ``k`` points from a uniform pool, each farthest from the design and earlier picks."""
    d = lower.size
    pool = lower + rng.random((pool_size, d)) * (upper - lower)
    dmin = np.min(((pool[:, None, :] - X[None, :, :]) ** 2).sum(-1), axis=1)
    chosen = []
    for _ in range(k):
        j = int(np.argmax(dmin))
        chosen.append(pool[j])
        dmin = np.minimum(dmin, ((pool - pool[j]) ** 2).sum(-1))
    return np.array(chosen)


def alm_step(state, n_starts=ALM_STARTS, seed=None):
    """Acquire the maximizer of predictive variance and refit.

    Returns ``(x_next, new_state)``; ``state`` itself is never modified, so
    an objective failure leaves the caller's state intact.
    """
    rng = np.random.default_rng(seed)
    starts = maximin_starts(state.X, state.lower, state.upper, n_starts, rng)

    point = state.model.point_predictor()

    def variance(x):
        return point(x)[1]

    best_x, best_v = None, -math.inf
    for s in starts:
        x, v = maximize_box(variance, s, state.lower, state.upper)
        if v > best_v:
            best_x, best_v = x, v
    return best_x, _advance(state, best_x, {"variance": best_v, "starts": starts})


def ei_step(state, n_starts=EI_STARTS, seed=None):
    """Acquire the maximizer of expected improvement and refit.

    Starts are ``n_starts`` uniform draws plus the incumbent (the observed
    input with the lowest predictive mean).  When EI vanishes everywhere it
    looked, the first start is taken and ``info['zero_acquisition']`` set.
    """
    rng = np.random.default_rng(seed)
    mu_obs = state.model.predict(state.X, return_var=False)
    mu_min = float(mu_obs.min())
    incumbent = state.X[int(np.argmin(mu_obs))]
    lower, upper = state.lower, state.upper
    starts = np.vstack([lower + rng.random((n_starts, lower.size)) * (upper - lower), incumbent])

    point = state.model.point_predictor()

    def ei(x):
        m, v = point(x)
        return ei_scalar(m, math.sqrt(v), mu_min)

    best_x, best_v = starts[0], 0.0
    for s in starts:
        x, v = maximize_box(ei, s, lower, upper)
        if v > best_v:
            best_x, best_v = x, v
    info = {"ei": best_v, "zero_acquisition": best_v <= 0.0, "starts": starts,
            "mu_min": mu_min}
    return best_x, _advance(state, best_x, info)


@dataclass
class SeqTrace:
    """Inputs, responses and a per-step metric from a sequential run.

    ``metric[k]`` is measured once the first ``n_init + k`` points are in.
    """

    X: np.ndarray
    y: np.ndarray
    metric: np.ndarray
    metric_name: str
    n_init: int

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        d = self.X.shape[1]
        w.writerow(["step", *(f"x{k + 1}" for k in range(d)), "y", self.metric_name])
        for i in range(self.X.shape[0]):
            k = i - self.n_init + 1
            m = repr(float(self.metric[k])) if k >= 0 else ""
            w.writerow([i + 1, *(repr(float(v)) for v in self.X[i]), repr(float(self.y[i])), m])
        return buf.getvalue()


def _grid(lower, upper, side):
    axes = [np.linspace(lo, hi, side) for lo, hi in zip(lower, upper)]
    return np.array(np.meshgrid(*axes, indexing="ij")).reshape(len(axes), -1).T


def run_alm(objective, init, total_n, noise_sd=0.01, seed=None, box=GL_BOX, test_grid=None,
            n_starts=ALM_STARTS):
    """ALM loop in the unit cube mapped onto ``box``; RMSPE after every step.

    ``init`` is a design in ``[0, 1]^d``; ``objective`` takes native
    coordinates.  The GP is fit in unit coordinates with lengthscale
    bounds ``(sqrt(eps), sqrt(d))`` and an estimated nugget, refit after
    every acquisition.  ``test_grid`` (native coordinates) defaults to a
    regular 100-per-side grid including the box edges.
    """
    U0 = np.asarray(getattr(init, "X", init), dtype=float)
    n0, d = U0.shape
    if total_n < n0:
        raise InvalidInputError("total_n must be at least the initial design size")
    lo = np.broadcast_to(np.asarray(box[0], dtype=float), (d,))
    hi = np.broadcast_to(np.asarray(box[1], dtype=float), (d,))
    noise_ss, step_ss = seed_sequence(seed).spawn(2)
    noise_rng = np.random.default_rng(noise_ss)

    def noisy(u):
        x = lo + np.atleast_2d(u) * (hi - lo)
        return objective(x) + noise_sd * noise_rng.standard_normal(x.shape[0])

    grid = _grid(lo, hi, GRID_SIDE) if test_grid is None else np.asarray(test_grid, dtype=float)
    truth = objective(grid)
    grid_u = (grid - lo) / (hi - lo)

    def rmspe(st):
        pred = st.model.predict(grid_u, return_var=False)
        return math.sqrt(float(np.mean((pred - truth) ** 2)))

    state = make_state(U0, noisy(U0), noisy, np.zeros(d), np.ones(d), EVERY_STEP,
                       with_nugget=True)
    metric = [rmspe(state)]
    for s in step_ss.spawn(total_n - n0):
        _, state = alm_step(state, n_starts, s)
        metric.append(rmspe(state))
    return SeqTrace(lo + state.X * (hi - lo), state.y, np.array(metric), "rmspe", n0)


def run_bo(objective, init, total_n, seed=None, box=None, n_starts=EI_STARTS, theta_hi=None):
    """EI loop on a noise-free objective; metric is the best value observed so far.

    ``init`` is a design in ``[0, 1]^d`` rescaled to ``box`` (native
    coordinates, default ``[-1, 1]^d``).  The lengthscale is estimated once,
    on the initial design, with bounds ``(sqrt(eps), 10 sqrt(d)]`` in native
    units, then held fixed.
    """
    U0 = np.asarray(getattr(init, "X", init), dtype=float)
    n0, d = U0.shape
    if total_n < n0:
        raise InvalidInputError("total_n must be at least the initial design size")
    box = box if box is not None else (-1.0, 1.0)
    lo = np.broadcast_to(np.asarray(box[0], dtype=float), (d,)).copy()
    hi = np.broadcast_to(np.asarray(box[1], dtype=float), (d,)).copy()
    X0 = lo + U0 * (hi - lo)
    theta_hi = theta_hi if theta_hi is not None else 10.0 * math.sqrt(d)
    state = make_state(X0, objective(X0), objective, lo, hi, FREEZE,
                       theta_bounds=(gp.SQRT_EPS, theta_hi), with_nugget=False)
    best = [float(np.min(state.y))]
    zero = 0
    for s in seed_sequence(seed).spawn(total_n - n0):
        _, state = ei_step(state, n_starts, s)
        zero += state.info["zero_acquisition"]
        best.append(min(best[-1], float(state.y[-1])))
    trace = SeqTrace(state.X, state.y, np.array(best), "best", n0)
    trace.zero_acquisitions = zero
    return trace
