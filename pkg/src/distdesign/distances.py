"""Pairwise distances, distance targets and Kolmogorov-Smirnov matching.

Distances live on ``[0, sqrt(d)]`` for a design in the unit hypercube, so
every target distribution is scaled to that support.  The KS statistic is
evaluated exactly at the ECDF step points; the incremental tracker keeps the
sorted target-CDF values of all pairs so that moving one or two points only
touches the affected ``O(n)`` pairs.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError

__all__ = [
    "DistanceSet",
    "DistanceTarget",
    "EmpiricalTarget",
    "IncrementalKsd",
    "betainc_reg",
    "beta_log_norm",
    "ks_from_sorted_cdf",
    "ksd",
    "pairwise_distances",
    "target_cdf",
]

_CF_TOL = 1e-12
_CF_MAXIT = 300
_FPMIN = 1e-300

FAMILY_UNIFORM = 0
FAMILY_BETA = 1


def beta_log_norm(a, b):
    """Return ``log(1 / B(a, b))``."""
    return math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)


def _betacf(a, b, x):
    # modified Lentz evaluation of the incomplete-beta continued fraction
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _FPMIN:
        d = _FPMIN
    d = 1.0 / d
    h = d
    for m in range(1, _CF_MAXIT + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = 1.0 + aa / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = 1.0 + aa / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _CF_TOL:
            break
    return h


def betainc_reg(a, b, x, log_norm=None):
    """Regularized incomplete beta function ``I_x(a, b)`` for scalar input.

    Parameters
    ----------
    a, b : float
        Positive shape parameters.
    x : float
        Evaluation point; values outside ``[0, 1]`` are clamped.
    log_norm : float, optional
        Precomputed ``beta_log_norm(a, b)``.
    """
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    if log_norm is None:
        log_norm = beta_log_norm(a, b)
    front = math.exp(log_norm + a * math.log(x) + b * math.log1p(-x))
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


@dataclass(frozen=True)
class DistanceTarget:
    """Reference distribution for pairwise distances, supported on ``[0, sqrt(d)]``.

    Use :meth:`beta_target` or :meth:`uniform` rather than the raw constructor.
    """

    family: str
    d: int
    alpha: float = 1.0
    beta: float = 1.0
    log_norm: float = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.family not in ("beta", "uniform"):
            raise InvalidInputError(f"unknown target family {self.family!r}")
        if self.d < 1:
            raise InvalidInputError("dimension must be >= 1")
        if self.family == "beta" and not (self.alpha > 0 and self.beta > 0):
            raise InvalidInputError("Beta shapes must be positive")
        object.__setattr__(self, "log_norm", beta_log_norm(self.alpha, self.beta))

    @classmethod
    def beta_target(cls, alpha, beta, d):
        return cls("beta", int(d), float(alpha), float(beta))

    @classmethod
    def uniform(cls, d):
        return cls("uniform", int(d))

    @property
    def scale(self):
        return math.sqrt(self.d)

    @property
    def code(self):
        return FAMILY_BETA if self.family == "beta" else FAMILY_UNIFORM

    def cdf_scalar(self, x):
        u = x / self.scale
        if self.family == "uniform":
            return min(max(u, 0.0), 1.0)
        return betainc_reg(self.alpha, self.beta, u, self.log_norm)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        if self.family == "uniform":
            return np.clip(x / self.scale, 0.0, 1.0)
        out = np.fromiter((self.cdf_scalar(v) for v in x.ravel()), float, x.size)
        return out.reshape(x.shape)

    # continuous targets have no jumps
    cdf_left = cdf

    def describe(self):
        if self.family == "uniform":
            return {"family": "uniform", "d": self.d}
        return {"family": "beta", "alpha": self.alpha, "beta": self.beta, "d": self.d}


class EmpiricalTarget:
    """Step-function target built from a sample (mainly for self-match checks)."""

    def __init__(self, values):
        self.values = np.sort(np.asarray(values, dtype=float))

    def cdf(self, x):
        return np.searchsorted(self.values, x, side="right") / self.values.size

    def cdf_left(self, x):
        return np.searchsorted(self.values, x, side="left") / self.values.size


def target_cdf(target, x):
    """Evaluate a target CDF (scalar or array input)."""
    out = target.cdf(x)
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class DistanceSet:
    """Sorted pairwise distances of a design (ties kept as repeats)."""

    values: np.ndarray

    @property
    def K(self):
        return self.values.size

    def unique(self):
        """Return ``(d_k, J_k)``: distinct distances and their multiplicities."""
        return np.unique(self.values, return_counts=True)

    def __len__(self):
        return self.values.size


def _as_design(X):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2:
        raise InvalidInputError("design must be a 2-d array")
    if not np.all(np.isfinite(X)):
        raise InvalidInputError("design contains nonfinite values")
    return X


def pair_distances_to(X, x):
    """Euclidean distances from ``x`` to each row of ``X``.

    The sum runs over dimensions in order, matching the compiled kernels
    bit for bit.
    """
    s = (X[:, 0] - x[0]) ** 2
    for k in range(1, X.shape[1]):
        s = s + (X[:, k] - x[k]) ** 2
    return np.sqrt(s)


def _upper_pair_distances(X):
    n = X.shape[0]
    out = []
    for i in range(n - 1):
        out.append(pair_distances_to(X[i + 1:], X[i]))
    return np.concatenate(out) if out else np.empty(0)


def pairwise_distances(X):
    """All ``n(n-1)/2`` Euclidean pair distances of a design, sorted."""
    X = _as_design(X)
    if X.shape[0] < 2:
        raise InvalidInputError("need at least two points for pairwise distances")
    return DistanceSet(np.sort(_upper_pair_distances(X)))


def ks_from_sorted_cdf(F):
    """KS statistic from the sorted target-CDF values of the sample.

    Assumes a continuous target; both one-sided gaps are checked at every step.
    """
    K = F.size
    upper = np.arange(1, K + 1) / K - F
    lower = F - np.arange(K) / K
    return float(max(upper.max(), lower.max()))


def ksd(dist, target):
    """One-sample KS distance ``sup_x |ECDF(x) - F(x)|``.

    Exact: the supremum is attained at a step point, either just before the
    jump (left limits) or at it.  Ties in ``dist`` are allowed.
    """
    if isinstance(dist, DistanceSet):
        x = dist.values
    else:
        x = np.sort(np.asarray(dist, dtype=float))
    if x.size == 0:
        raise InvalidInputError("empty distance set")
    K = x.size
    ecdf_right = np.searchsorted(x, x, side="right") / K
    ecdf_left = np.searchsorted(x, x, side="left") / K
    F = np.asarray(target.cdf(x), dtype=float)
    F_left = np.asarray(target.cdf_left(x), dtype=float)
    stat = max(np.abs(ecdf_right - F).max(), np.abs(ecdf_left - F_left).max())
    return float(min(max(stat, 0.0), 1.0))


def _remove_sorted(s, old):
    # delete one occurrence of each value in `old` from the sorted array `s`
    o = np.sort(old)
    pos = np.searchsorted(s, o, side="left")
    pos = pos + (np.arange(o.size) - np.searchsorted(o, o, side="left"))
    return np.delete(s, pos)


def replace_sorted(s, old, new):
    """Swap multiset ``old`` for ``new`` inside sorted array ``s``."""
    kept = _remove_sorted(s, old)
    new = np.sort(new)
    return np.insert(kept, np.searchsorted(kept, new, side="left"), new)


class IncrementalKsd:
    """KS distance of a design against a continuous target, updated per move.

    Holds the target CDF of every pair distance plus their sorted vector.
    ``propose`` prices a move of one or more points without committing it;
    ``commit`` applies the last proposal.
    """

    def __init__(self, X, target):
        self.X = _as_design(X).copy()
        self.target = target
        n = self.X.shape[0]
        if n < 2:
            raise InvalidInputError("need at least two points")
        self.F = np.zeros((n, n))
        for i in range(n - 1):
            row = target.cdf(pair_distances_to(self.X[i + 1:], self.X[i]))
            self.F[i, i + 1:] = row
            self.F[i + 1:, i] = row
        iu = np.triu_indices(n, 1)
        self.sorted_cdf = np.sort(self.F[iu])
        self.value = ks_from_sorted_cdf(self.sorted_cdf)
        self._pending = None

    def _affected(self, moved):
        n = self.X.shape[0]
        moved = sorted(moved)
        mask = np.ones(n, bool)
        mask[moved] = False
        rest = np.flatnonzero(mask)
        return moved, rest

    def propose(self, moves):
        """Price moving points ``{index: new_coordinates}``; returns the new KSD."""
        moved, rest = self._affected(moves)
        Xnew = self.X.copy()
        for i in moved:
            Xnew[i] = moves[i]
        old, new, rows = [], [], {}
        for a, i in enumerate(moved):
            others = np.concatenate([rest, np.asarray(moved[a + 1:], dtype=int)]).astype(int)
            Fi = self.target.cdf(pair_distances_to(Xnew[others], Xnew[i]))
            rows[i] = (others, Fi)
            old.append(self.F[i, others])
            new.append(Fi)
        old = np.concatenate(old)
        new = np.concatenate(new)
        merged = replace_sorted(self.sorted_cdf, old, new)
        value = ks_from_sorted_cdf(merged)
        self._pending = (Xnew, rows, merged, value)
        return value

    def commit(self):
        if self._pending is None:
            raise RuntimeError("no pending proposal")
        Xnew, rows, merged, value = self._pending
        self.X = Xnew
        for i, (others, Fi) in rows.items():
            self.F[i, others] = Fi
            self.F[others, i] = Fi
        self.sorted_cdf = merged
        self.value = value
        self._pending = None
