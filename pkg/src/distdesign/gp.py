"""Isotropic Gaussian-kernel GP: covariance, simulation, prediction and MLE.

Covariance between inputs ``x`` and ``x'`` is ``tau2 * exp(-||x - x'||^2 / theta)``
plus ``nugget`` on the diagonal.  Note ``theta`` divides the *squared*
distance, so it carries squared input units.

Likelihood-based fitting profiles out ``tau2``: with correlation matrix
``C = R_theta + g I`` (``g`` the nugget relative to ``tau2``) the MLE is
``tau2_hat = Y' C^-1 Y / n`` and the concentrated log-likelihood reported
here is::

    ll(theta, g) = -n/2 * log(Y' C^-1 Y / n) - 1/2 * log|C|

i.e. the exact profile log-likelihood minus the constant
``n/2 * (1 + log(2 pi))``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular
from scipy.linalg.blas import dtrsv
from scipy.optimize import minimize_scalar
from scipy.spatial.distance import cdist

from .errors import DegenerateDataError, InvalidInputError, NumericalError

__all__ = [
    "GpModel",
    "Kernel",
    "SQRT_EPS",
    "concentrated_loglik",
    "cov_matrix",
    "fit_mle",
    "mle_theta",
    "predict",
    "simulate_mvn",
]

SQRT_EPS = math.sqrt(np.finfo(float).eps)
THETA_FLOOR = 1e-8
JITTER_START = 1e-10
JITTER_MAX = 1e-4
GRID_SIZE = 20
N_STARTS = 5
MAX_SWEEPS = 50
SWEEP_RTOL = 1e-6
NUGGET_BOUNDS = (SQRT_EPS, 1.0)
XATOL = 1e-5  # log-parameter tolerance of the local refinement


@dataclass(frozen=True)
class Kernel:
    """Hyperparameters: lengthscale ``theta``, amplitude ``tau2``, absolute ``nugget``.

    ``at_bound`` is set by :func:`mle_theta` when ``theta`` landed on a
    search-interval endpoint.
    """

    theta: float
    tau2: float = 1.0
    nugget: float = 0.0
    at_bound: bool = False

    def __post_init__(self):
        if not self.theta > THETA_FLOOR:
            raise InvalidInputError(f"theta must exceed {THETA_FLOOR}, got {self.theta}")
        if not self.tau2 > 0:
            raise InvalidInputError(f"tau2 must be positive, got {self.tau2}")
        if not self.nugget >= 0:
            raise InvalidInputError(f"nugget must be nonnegative, got {self.nugget}")

    @property
    def g(self):
        """Nugget relative to ``tau2``."""
        return self.nugget / self.tau2


def _as_inputs(X, name="X"):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2 or X.shape[0] < 1:
        raise InvalidInputError(f"{name} must be a nonempty 2-d array")
    if not np.all(np.isfinite(X)):
        raise InvalidInputError(f"{name} contains nonfinite values")
    return X


def _as_responses(Y, n):
    Y = np.asarray(Y, dtype=float).ravel()
    if Y.size != n:
        raise InvalidInputError(f"expected {n} responses, got {Y.size}")
    if not np.all(np.isfinite(Y)):
        raise InvalidInputError("responses contain nonfinite values")
    return Y


def _noise_diag(n, g, reps):
    if reps is None:
        return np.full(n, g)
    return g / np.asarray(reps, dtype=float)


def cov_matrix(X, kernel, X2=None):
    """Covariance matrix of ``X`` (or cross-covariance of ``X`` and ``X2``).

    The nugget is added only on the diagonal of the square ``X``-``X`` matrix.
    """
    X = _as_inputs(X)
    if X2 is None:
        K = kernel.tau2 * np.exp(-cdist(X, X, "sqeuclidean") / kernel.theta)
        K[np.diag_indices_from(K)] = kernel.tau2 + kernel.nugget
        return K
    X2 = _as_inputs(X2, "X2")
    if X2.shape[1] != X.shape[1]:
        raise InvalidInputError("dimension mismatch between X and X2")
    return kernel.tau2 * np.exp(-cdist(X, X2, "sqeuclidean") / kernel.theta)


def _cholesky(K, scale=1.0):
    """Lower Cholesky factor, adding diagonal jitter ``1e-10..1e-4 * scale`` if needed."""
    try:
        return np.linalg.cholesky(K), 0.0
    except np.linalg.LinAlgError:
        pass
    jitter = JITTER_START * scale
    eye = np.eye(K.shape[0])
    while jitter <= JITTER_MAX * scale * (1 + 1e-9):
        try:
            return np.linalg.cholesky(K + jitter * eye), jitter
        except np.linalg.LinAlgError:
            jitter *= 10.0
    raise NumericalError("covariance matrix not positive definite even with jitter")


def simulate_mvn(X, kernel, seed=None, z=None):
    """Draw ``Y ~ N(0, K)`` at the rows of ``X`` as ``L z``.

    Pass ``z`` (standard normal draws) to share randomness across designs;
    an ``(n, m)`` block of draws yields ``m`` independent columns.
    """
    X = _as_inputs(X)
    K = cov_matrix(X, kernel)
    L, _ = _cholesky(K, kernel.tau2)
    if z is None:
        z = np.random.default_rng(seed).standard_normal(X.shape[0])
    return L @ np.asarray(z, dtype=float)


@dataclass(frozen=True)
class GpModel:
    """A GP conditioned on ``(X, Y)``; ``chol`` factors ``K_n``, ``alpha_vec = K_n^-1 Y``."""

    X: np.ndarray
    Y: np.ndarray
    kernel: Kernel
    chol: np.ndarray
    alpha_vec: np.ndarray
    jitter: float = 0.0
    reps: np.ndarray | None = None

    @classmethod
    def fit(cls, X, Y, kernel, reps=None):
        X = _as_inputs(X)
        Y = _as_responses(Y, X.shape[0])
        K = kernel.tau2 * np.exp(-cdist(X, X, "sqeuclidean") / kernel.theta)
        K[np.diag_indices_from(K)] += kernel.tau2 * _noise_diag(X.shape[0], kernel.g, reps)
        L, jitter = _cholesky(K, kernel.tau2)
        alpha = solve_triangular(L.T, solve_triangular(L, Y, lower=True), lower=False)
        return cls(X, Y, kernel, L, alpha, jitter, reps)

    @classmethod
    def fit_profile(cls, X, Y, theta, g=0.0, reps=None):
        """Condition on fixed ``theta`` and relative nugget ``g``; ``tau2`` by closed form."""
        X = _as_inputs(X)
        Y = _as_responses(Y, X.shape[0])
        C = np.exp(-cdist(X, X, "sqeuclidean") / theta)
        C[np.diag_indices_from(C)] += _noise_diag(X.shape[0], g, reps)
        Lc, jitter = _cholesky(C)
        w = solve_triangular(Lc, Y, lower=True)
        tau2 = float(w @ w) / X.shape[0]
        if not tau2 > 0:
            raise DegenerateDataError("responses are identically zero")
        kernel = Kernel(theta, tau2, g * tau2)
        L = math.sqrt(tau2) * Lc
        alpha = solve_triangular(Lc.T, w, lower=False) / tau2
        return cls(X, Y, kernel, L, alpha, jitter * tau2, reps)

    @property
    def n(self):
        return self.X.shape[0]

    def predict(self, Xnew, return_var=True):
        Xnew = _as_inputs(Xnew, "Xnew")
        if Xnew.shape[1] != self.X.shape[1]:
            raise InvalidInputError(
                f"Xnew has {Xnew.shape[1]} columns, model expects {self.X.shape[1]}"
            )
        kx = self.kernel.tau2 * np.exp(-cdist(Xnew, self.X, "sqeuclidean") / self.kernel.theta)
        mean = kx @ self.alpha_vec
        if not return_var:
            return mean
        v = solve_triangular(self.chol, kx.T, lower=True, check_finite=False)
        var = self.kernel.tau2 - np.einsum("ij,ij->j", v, v)
        return mean, np.maximum(var, 0.0)


    def point_predictor(self):
        """Fast ``x -> (mean, var)`` for a single point, for inner optimization loops."""
        Linv = solve_triangular(self.chol, np.eye(self.n), lower=True)
        X, a = self.X, self.alpha_vec
        tau2, theta = self.kernel.tau2, self.kernel.theta

        def f(x):
            k = tau2 * np.exp(-np.sum((X - x) ** 2, axis=1) / theta)
            v = Linv @ k
            return float(k @ a), max(tau2 - float(v @ v), 0.0)

        return f


def predict(model, Xnew):
    """Predictive mean and (latent, nugget-free) variance at the rows of ``Xnew``."""
    return model.predict(Xnew)


class _LikWork:
    """Cached squared distances for repeated likelihood evaluations."""

    def __init__(self, X, Y, reps=None):
        self.D2 = cdist(X, X, "sqeuclidean")
        self.Y = Y
        self.n = Y.size
        self.reps = reps
        self.diag = np.diag_indices(self.n)

    def loglik(self, theta, g):
        C = np.exp(self.D2 * (-1.0 / theta))
        C[self.diag] += _noise_diag(self.n, g, self.reps)
        L, _ = _cholesky(C)
        # L.T is Fortran-ordered upper; trans=1 solves L z = Y without a copy
        z = dtrsv(L.T, self.Y, lower=0, trans=1)
        q = float(z @ z)
        return -0.5 * self.n * math.log(q / self.n) - float(np.log(L.diagonal()).sum())

    def loglik_grid(self, thetas, g):
        C = np.exp(-self.D2[None, :, :] / thetas[:, None, None])
        C[:, self.diag[0], self.diag[1]] += _noise_diag(self.n, g, self.reps)
        try:
            L = np.linalg.cholesky(C)
        except np.linalg.LinAlgError:
            return np.array([self.loglik(t, g) for t in thetas])
        z = np.linalg.solve(L, np.broadcast_to(self.Y, (thetas.size, self.n))[..., None])[..., 0]
        q = np.einsum("ij,ij->i", z, z)
        logdet = np.log(np.diagonal(L, axis1=1, axis2=2)).sum(axis=1)
        return -0.5 * self.n * np.log(q / self.n) - logdet


def _prepare(X, Y, reps):
    X = _as_inputs(X)
    Y = _as_responses(Y, X.shape[0])
    if np.ptp(Y) == 0.0:
        raise DegenerateDataError("responses have zero variance")
    return X, Y


def concentrated_loglik(X, Y, theta, nugget=0.0, reps=None):
    """Profile log-likelihood of ``theta`` (``nugget`` relative to ``tau2``).

    See the module docstring for the constant convention.
    """
    X = _as_inputs(X)
    Y = _as_responses(Y, X.shape[0])
    if not theta > 0:
        raise InvalidInputError("theta must be positive")
    return _LikWork(X, Y, reps).loglik(float(theta), float(nugget))


def _refine(f, lo, hi, xatol):
    # maximize f over log-parameter interval [lo, hi]
    res = minimize_scalar(lambda u: -f(u), bounds=(lo, hi), method="bounded",
                          options={"xatol": xatol})
    return float(res.x), -float(res.fun)


def _theta_search(work, g, log_lo, log_hi, n_starts, grid_size):
    grid = np.linspace(log_lo, log_hi, grid_size)
    vals = work.loglik_grid(np.exp(grid), g)
    vals = np.where(np.isfinite(vals), vals, -np.inf)
    # a peak beats one neighbour strictly; flat plateaus are not refined
    left = np.r_[-np.inf, vals[:-1]]
    right = np.r_[vals[1:], -np.inf]
    is_peak = (vals >= left) & (vals >= right) & ((vals > left) | (vals > right))
    order = [k for k in np.argsort(-vals, kind="stable") if is_peak[k]][:n_starts]
    best_u, best_v = grid[int(np.argmax(vals))], float(np.max(vals))
    for k in order:
        lo = grid[max(k - 1, 0)]
        hi = grid[min(k + 1, grid_size - 1)]
        u, v = _refine(lambda s: work.loglik(math.exp(s), g), lo, hi, XATOL)
        if v > best_v:
            best_u, best_v = u, v
    return best_u, best_v


def _bracket_search(f, u0, v0, lo, hi, width):
    u, v = _refine(f, max(lo, u0 - width), min(hi, u0 + width), XATOL)
    return (u, v) if v > v0 else (u0, v0)


def mle_theta(X, Y, bounds=None, with_nugget=False, nugget=0.0, nugget_bounds=NUGGET_BOUNDS,
              reps=None, init=None, n_starts=N_STARTS, grid_size=GRID_SIZE):
    """Maximize the concentrated likelihood over ``theta`` (and optionally the nugget).

    Parameters
    ----------
    X, Y : array_like
        Inputs ``(n, d)`` and responses ``(n,)``.
    bounds : (float, float), optional
        Search interval for ``theta``; defaults to ``(sqrt(eps), sqrt(d))``.
    with_nugget : bool
        Jointly estimate the relative nugget by alternating coordinate searches.
    nugget : float
        Fixed relative nugget when ``with_nugget`` is false.
    reps : array_like, optional
        Replicate counts; the nugget on point ``i`` is divided by ``reps[i]``.
    init : Kernel, optional
        Warm start; skips the coarse grid and searches near ``init``.
    n_starts : int
        Maximum number of grid peaks refined locally.

    Returns
    -------
    Kernel
        ``theta``, closed-form ``tau2`` and absolute nugget; ``at_bound`` flags
        a solution on an interval endpoint.
    """
    X, Y = _prepare(X, Y, reps)
    lo, hi = bounds if bounds is not None else (SQRT_EPS, math.sqrt(X.shape[1]))
    if not (lo > THETA_FLOOR and hi > lo):
        raise InvalidInputError(f"bad theta bounds ({lo}, {hi})")
    work = _LikWork(X, Y, reps)
    log_lo, log_hi = math.log(lo), math.log(hi)

    if not with_nugget:
        g = float(nugget)
        if init is None:
            u, v = _theta_search(work, g, log_lo, log_hi, n_starts, grid_size)
        else:
            u0 = min(max(math.log(init.theta), log_lo), log_hi)
            u, v = _bracket_search(lambda s: work.loglik(math.exp(s), g), u0,
                                   work.loglik(math.exp(u0), g), log_lo, log_hi, 2.0)
        return _finish(work, math.exp(u), g, lo, hi)

    glo, ghi = (math.log(b) for b in nugget_bounds)
    if init is None:
        w = min(max(math.log(1e-2), glo), ghi)
        u, v = _theta_search(work, math.exp(w), log_lo, log_hi, n_starts, grid_size)
    else:
        u = min(max(math.log(init.theta), log_lo), log_hi)
        w = min(max(math.log(max(init.g, nugget_bounds[0])), glo), ghi)
        v = work.loglik(math.exp(u), math.exp(w))
    for sweep in range(MAX_SWEEPS):
        u_old, w_old = u, w
        if sweep > 0 or init is not None:
            u, v = _bracket_search(lambda s: work.loglik(math.exp(s), math.exp(w)),
                                   u, v, log_lo, log_hi, 2.0)
        width = (ghi - glo) if (sweep == 0 and init is None) else 3.0
        w, v = _bracket_search(lambda s: work.loglik(math.exp(u), math.exp(s)),
                               w, v, glo, ghi, width)
        # log-scale steps approximate relative changes
        if abs(u - u_old) < SWEEP_RTOL and abs(w - w_old) < SWEEP_RTOL:
            break
    return _finish(work, math.exp(u), math.exp(w), lo, hi)


def _finish(work, theta, g, lo, hi):
    theta = min(max(theta, lo), hi)
    at_bound = math.isclose(theta, lo, rel_tol=1e-6) or math.isclose(theta, hi, rel_tol=1e-6)
    if at_bound:
        theta = lo if math.isclose(theta, lo, rel_tol=1e-6) else hi
    C = np.exp(-work.D2 / theta)
    C[work.diag] += _noise_diag(work.n, g, work.reps)
    L, _ = _cholesky(C)
    z = solve_triangular(L, work.Y, lower=True, check_finite=False)
    tau2 = float(z @ z) / work.n
    return Kernel(theta, tau2, g * tau2, at_bound)


def fit_mle(X, Y, **kwargs):
    """Estimate hyperparameters by :func:`mle_theta` and condition on the data."""
    kernel = mle_theta(X, Y, **kwargs)
    return GpModel.fit(X, Y, kernel, reps=kwargs.get("reps"))
