"""Tuning Beta shapes for betadist designs.

The criterion (``derimse``) measures how well lengthscales are recovered
from betadist designs with shapes ``(alpha, beta)``, standardized against
the typical accuracy at each true lengthscale (the detrending surface), and
averaged over a grid of true lengthscales.  ``tune_shapes`` minimizes that
noisy criterion over ``[1, 10]^2`` with expected-improvement Bayesian
optimization on a replicate-aware GP surrogate.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.special import ndtr

from . import gp
from ._rng import seed_sequence
from .designs import dist_targeted_design, maximin_design
from .distances import DistanceTarget
from .errors import DegenerateDataError, InvalidInputError
from .optim import maximize_box

__all__ = [
    "SHAPE_CATALOG",
    "CatalogHit",
    "DetrendSurface",
    "RimseConfig",
    "TuneResult",
    "build_detrend",
    "catalog_lookup",
    "derimse",
    "detrend_from_samples",
    "ei_scalar",
    "expected_improvement",
    "quadratic_oracle",
    "rmse_at",
    "rmse_curve",
    "tune_shapes",
]

SHAPE_LO, SHAPE_HI = 1.0, 10.0
SIGMA_FLOOR = 1e-6
MAD_SCALE = 1.4826
MAX_RETRIES = 3
BAND = 0.05

# (n, d) -> near-optimal (alpha, beta) used for betadist/lhsbeta designs
SHAPE_CATALOG = {
    (8, 2): (1.5, 5.0),
    (16, 2): (2.0, 4.0),
    (16, 3): (2.5, 5.0),
    (32, 3): (3.0, 5.0),
    (32, 4): (1.5, 3.5),
    (64, 4): (3.0, 6.0),
    (64, 5): (2.0, 6.0),
    (128, 5): (1.0, 3.0),
    (128, 6): (2.0, 4.0),
}


@dataclass(frozen=True)
class CatalogHit:
    alpha: float
    beta: float
    key: tuple
    extrapolated: bool


def catalog_lookup(n, d):
    """Catalog shapes for ``(n, d)``; otherwise the nearest key in ``(log2 n, d)``."""
    key = (int(n), int(d))
    if key in SHAPE_CATALOG:
        return CatalogHit(*SHAPE_CATALOG[key], key, False)
    if n < 1 or d < 1:
        raise InvalidInputError("n and d must be positive")
    nearest = min(
        SHAPE_CATALOG,
        key=lambda k: (math.log2(k[0]) - math.log2(n)) ** 2 + (k[1] - d) ** 2,
    )
    return CatalogHit(*SHAPE_CATALOG[nearest], nearest, True)


def expected_improvement(mu, sigma, mu_min):
    """Expected improvement below ``mu_min`` of a ``N(mu, sigma^2)`` prediction."""
    mu = np.asarray(mu, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    gap = mu_min - mu
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        z = gap / sigma
        ei = gap * ndtr(z) + sigma * np.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi)
    ei = np.where(sigma > 0, ei, np.maximum(gap, 0.0))
    ei = np.maximum(ei, 0.0)
    return float(ei) if ei.ndim == 0 else ei


def ei_scalar(mu, sigma, mu_min):
    """Scalar :func:`expected_improvement` without array overhead."""
    if sigma <= 0.0:
        return max(mu_min - mu, 0.0)
    z = (mu_min - mu) / sigma
    return max((mu_min - mu) * 0.5 * math.erfc(-z / math.sqrt(2.0))
               + sigma * math.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi), 0.0)


@dataclass(frozen=True)
class RimseConfig:
    """Settings of the lengthscale-recovery experiment behind deRIMSE.

    ``S`` is the number of swap iterations per betadist design.
    """

    n: int
    d: int
    T: int = 30
    R: int = 30
    D: int = 5
    S: int = 100_000
    theta_lo: float = 0.1

    def __post_init__(self):
        if self.T < 2 or self.D < 1 or self.R < 1:
            raise InvalidInputError("need T >= 2, D >= 1, R >= 1")

    @property
    def theta_grid(self):
        return np.linspace(self.theta_lo, math.sqrt(self.d), self.T)

    @property
    def theta_bounds(self):
        return (gp.SQRT_EPS, math.sqrt(self.d))


def _mle(X, Y, theta_true, bounds):
    return gp.mle_theta(X, Y, bounds=bounds).theta


def rmse_curve(config, alpha, beta, seed=None, estimator=None):
    """Lengthscale RMSE at every grid value, from ``D`` designs shared across the grid."""
    estimator = estimator or _mle
    ss = seed_sequence(seed)
    design_ss, sim_ss = ss.spawn(2)
    target = DistanceTarget.beta_target(alpha, beta, config.d)
    designs = [
        dist_targeted_design(config.n, config.d, target, config.S, np.random.default_rng(s)).X
        for s in design_ss.spawn(config.D)
    ]
    sims = sim_ss.spawn(config.T)
    grid = config.theta_grid
    out = np.empty(config.T)
    for t, theta in enumerate(grid):
        rng = np.random.default_rng(sims[t])
        sq = 0.0
        for X in designs:
            sq += (_estimate(X, theta, rng, estimator, config.theta_bounds) - theta) ** 2
        out[t] = math.sqrt(sq / config.D)
    return out


def _estimate(X, theta, rng, estimator, bounds):
    kernel = gp.Kernel(theta, 1.0)
    for attempt in range(MAX_RETRIES + 1):
        Y = gp.simulate_mvn(X, kernel, rng)
        try:
            return estimator(X, Y, theta, bounds)
        except DegenerateDataError:
            if attempt == MAX_RETRIES:
                raise
    raise AssertionError("unreachable")


def rmse_at(config, alpha, beta, t_index, seed=None, estimator=None):
    """RMSE of the lengthscale MLE at grid point ``t_index`` (1-based).

    Equals entry ``t_index - 1`` of :func:`rmse_curve` for the same seed.
    """
    if not 1 <= t_index <= config.T:
        raise InvalidInputError(f"t_index must be in 1..{config.T}")
    return float(rmse_curve(config, alpha, beta, seed, estimator)[t_index - 1])


@dataclass(frozen=True)
class DetrendSurface:
    """Location ``mu_t`` and scale ``sigma_t`` of the accuracy metric per grid point."""

    theta_grid: np.ndarray
    mu_t: np.ndarray
    sigma_t: np.ndarray

    def standardize(self, values):
        return (np.asarray(values, dtype=float) - self.mu_t) / self.sigma_t


def _smooth(x, y):
    # 1-d GP smoother with estimated lengthscale and nugget; constant input passes through
    if np.ptp(y) == 0.0:
        return y.copy()
    u = (x - x.min()) / np.ptp(x)
    center = y.mean()
    kernel = gp.mle_theta(u[:, None], y - center, bounds=(1e-2, 10.0), with_nugget=True)
    model = gp.GpModel.fit(u[:, None], y - center, kernel)
    return model.predict(u[:, None], return_var=False) + center


def detrend_from_samples(theta_grid, samples, smooth=True):
    """Robust per-grid-point location/scale, smoothed along the grid.

    ``samples`` is ``(T, m)``: ``m`` replicate metrics at each grid value.
    Location is the median, scale the normal-consistent MAD, floored at
    ``1e-6``; both are then passed through a 1-d GP smoother (the scale on
    the log axis so it stays positive).
    """
    samples = np.asarray(samples, dtype=float)
    theta_grid = np.asarray(theta_grid, dtype=float)
    mu = np.median(samples, axis=1)
    sigma = MAD_SCALE * np.median(np.abs(samples - mu[:, None]), axis=1)
    sigma = np.maximum(sigma, SIGMA_FLOOR)
    if smooth:
        mu = _smooth(theta_grid, mu)
        if np.ptp(sigma) > 0.0:
            sigma = np.maximum(np.exp(_smooth(theta_grid, np.log(sigma))), SIGMA_FLOOR)
    return DetrendSurface(theta_grid, mu, sigma)


def build_detrend(config, seed=None, rmse_fn=None):
    """Detrending surface from ``R`` random shapes drawn from ``Unif(1, 10)^2``.

    ``rmse_fn(alpha, beta, seed)`` returns the ``T``-vector of RMSEs; it
    defaults to :func:`rmse_curve`.
    """
    if config.R < 5:
        raise InvalidInputError("need R >= 5 random shapes")
    rmse_fn = rmse_fn or (lambda a, b, s: rmse_curve(config, a, b, s))
    ss = seed_sequence(seed)
    shape_ss, *rep_ss = ss.spawn(config.R + 1)
    shapes = np.random.default_rng(shape_ss).uniform(SHAPE_LO, SHAPE_HI, size=(config.R, 2))
    curves = np.column_stack([rmse_fn(a, b, s) for (a, b), s in zip(shapes, rep_ss)])
    return detrend_from_samples(config.theta_grid, curves)


def derimse(config, detrend, alpha, beta, seed=None, rmse_fn=None):
    """Mean standardized lengthscale RMSE over the grid for shapes ``(alpha, beta)``."""
    rmse_fn = rmse_fn or (lambda a, b, s: rmse_curve(config, a, b, s))
    values = np.asarray(rmse_fn(alpha, beta, seed), dtype=float)
    if values.shape != detrend.mu_t.shape:
        raise InvalidInputError("RMSE curve does not match the detrending grid")
    return float(np.mean(detrend.standardize(values)))


def quadratic_oracle(center=(3.0, 6.5), floor=-1.0, scale=20.0):
    """Deterministic bowl with known minimizer, for checking the optimizer."""
    a0, b0 = center

    def criterion(alpha, beta, seed=None):
        return floor + ((alpha - a0) ** 2 + (beta - b0) ** 2) / scale

    return criterion


@dataclass
class TuneResult:
    """Outcome of shape tuning.

    ``evaluations`` logs every criterion call; ``band`` lists lattice shapes
    (step 0.5) whose predicted criterion is within 5% of the best.
    """

    evaluations: list
    best: tuple
    best_value: float
    near_optimal: tuple
    band: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def sites(self):
        """Per-site mean criterion and replicate count."""
        acc = {}
        for ev in self.evaluations:
            key = (ev["alpha"], ev["beta"])
            tot, cnt = acc.get(key, (0.0, 0))
            acc[key] = (tot + ev["value"], cnt + 1)
        return [(k, tot / cnt, cnt) for k, (tot, cnt) in acc.items()]

    def to_json(self):
        doc = asdict(self)
        doc["best"] = list(self.best)
        doc["near_optimal"] = list(self.near_optimal)
        return json.dumps(doc, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text):
        doc = json.loads(text)
        return cls(
            evaluations=doc["evaluations"],
            best=tuple(doc["best"]),
            best_value=doc["best_value"],
            near_optimal=tuple(doc["near_optimal"]),
            band=[tuple(b) for b in doc.get("band", [])],
            meta=doc.get("meta", {}),
        )


def _to_unit(ab):
    return (np.asarray(ab, dtype=float) - SHAPE_LO) / (SHAPE_HI - SHAPE_LO)


def _from_unit(u):
    return SHAPE_LO + np.asarray(u, dtype=float) * (SHAPE_HI - SHAPE_LO)


class _Surrogate:
    """Homoskedastic GP on replicate means over the unit-scaled shape box."""

    THETA_BOUNDS = (1e-3, 10.0)

    def __init__(self, evaluations):
        acc = {}
        for ev in evaluations:
            key = (ev["alpha"], ev["beta"])
            acc.setdefault(key, []).append(ev["value"])
        keys = list(acc)
        self.sites = np.array(keys, dtype=float)
        self.U = _to_unit(self.sites)
        self.ybar = np.array([np.mean(acc[k]) for k in keys])
        self.reps = np.array([len(acc[k]) for k in keys], dtype=float)
        self.center = float(np.average(self.ybar, weights=self.reps))
        y = self.ybar - self.center
        if np.ptp(y) == 0.0:
            y = y + 1e-12 * np.arange(y.size)
        self.kernel = gp.mle_theta(self.U, y, bounds=self.THETA_BOUNDS, with_nugget=True,
                                   reps=self.reps)
        self.model = gp.GpModel.fit(self.U, y, self.kernel, reps=self.reps)

    def predict(self, U):
        mean, var = self.model.predict(np.atleast_2d(U))
        return mean + self.center, np.sqrt(var)

    def mean(self, U):
        return self.model.predict(np.atleast_2d(U), return_var=False) + self.center


def _acquire(sur, rng, n_random=200, n_refine=5):
    mu_obs = sur.mean(sur.U)
    mu_min = float(mu_obs.min())

    def ei(u):
        m, s = sur.predict(u)
        return expected_improvement(m, s, mu_min)

    # discrete search over existing sites (replication) plus random candidates
    cand = np.vstack([sur.U, rng.random((n_random, 2))])
    vals = ei(cand)
    order = np.argsort(-vals, kind="stable")
    best_u, best_v = cand[order[0]], float(vals[order[0]])
    point = sur.model.point_predictor()

    def ei_point(u):
        m, v = point(u)
        return ei_scalar(m + sur.center, math.sqrt(v), mu_min)

    for k in order[:n_refine]:
        u, v = maximize_box(ei_point, cand[k], np.zeros(2), np.ones(2), max_evals=120)
        if v > best_v:
            best_u, best_v = u, v
    return np.clip(best_u, 0.0, 1.0), best_v


def _summarize(sur):
    # argmin of predicted mean: dense grid, then local polish
    g = np.linspace(0.0, 1.0, 91)
    G = np.array(np.meshgrid(g, g, indexing="ij")).reshape(2, -1).T
    mu = sur.mean(G)
    k = int(np.argmin(mu))
    u, negv = maximize_box(lambda x: -float(sur.mean(x[None, :])[0]), G[k], np.zeros(2), np.ones(2))
    best_u, best_v = (u, -negv) if -negv <= mu[k] else (G[k], float(mu[k]))
    best = tuple(float(v) for v in _from_unit(best_u))

    lattice = np.arange(SHAPE_LO, SHAPE_HI + 0.25, 0.5)
    L = np.array(np.meshgrid(lattice, lattice, indexing="ij")).reshape(2, -1).T
    mu_l = sur.mean(_to_unit(L))
    cut = best_v + BAND * abs(best_v)
    inside = np.flatnonzero(mu_l <= cut)
    band = [(float(L[i, 0]), float(L[i, 1]), float(mu_l[i])) for i in inside]
    if inside.size:
        pick = min(inside, key=lambda i: (L[i].sum(), L[i, 0]))
    else:
        pick = int(np.argmin(mu_l))
    near = (float(L[pick, 0]), float(L[pick, 1]))
    return best, best_v, near, band


def tune_shapes(config, budget, seed=None, criterion=None, detrend=None, n_sites=20,
                site_reps=10, log=None):
    """Minimize a noisy shape criterion over ``[1, 10]^2`` by EI-driven BO.

    Parameters
    ----------
    config : RimseConfig
        Experiment settings for the default deRIMSE criterion.
    budget : int
        Number of acquisitions after the seed stage.
    seed : int, optional
        Master seed.
    criterion : callable, optional
        ``criterion(alpha, beta, seed) -> float``; defaults to
        :func:`derimse` against ``detrend`` (built from ``config`` if absent).
    n_sites, site_reps : int
        Seed stage: a maximin design of ``n_sites`` shapes, each evaluated
        ``site_reps`` times with common random numbers across sites.
    log : callable, optional
        Called with each acquisition record.
    """
    if budget < 0:
        raise InvalidInputError("budget must be >= 0")
    ss = seed_sequence(seed)
    design_ss, rep_ss, acq_ss, detrend_ss = ss.spawn(4)
    if criterion is None:
        if detrend is None:
            detrend = build_detrend(config, detrend_ss)
        criterion = lambda a, b, s: derimse(config, detrend, a, b, s)  # noqa: E731

    sites = _from_unit(maximin_design(n_sites, 2, 10_000, np.random.default_rng(design_ss)).X)
    evaluations = []
    for r, rs in enumerate(rep_ss.spawn(site_reps)):
        for a, b in sites:
            # same seed for every site within a replicate: common random numbers
            value = float(criterion(float(a), float(b), seed_sequence(rs)))
            evaluations.append({"alpha": float(a), "beta": float(b), "value": value,
                                "stage": "seed", "rep": r})

    sur = _Surrogate(evaluations)
    acq_rng = np.random.default_rng(acq_ss)
    for j, es in enumerate(acq_ss.spawn(budget)):
        u, ei = _acquire(sur, acq_rng)
        a, b = (float(v) for v in _from_unit(u))
        value = float(criterion(a, b, es))
        rec = {"alpha": a, "beta": b, "value": value, "stage": "acquisition", "rep": j, "ei": ei}
        evaluations.append(rec)
        if log is not None:
            log(rec)
        sur = _Surrogate(evaluations)

    best, best_v, near, band = _summarize(sur)
    meta = {"budget": budget, "n_sites": n_sites, "site_reps": site_reps,
            "config": asdict(config), "seed": seed if isinstance(seed, int) else None}
    return TuneResult(evaluations, best, best_v, near, band, meta)
