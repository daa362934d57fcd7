"""Design constructors for the unit hypercube.

Covers the comparators used in lengthscale-estimation studies: random, Latin
hypercube, maximin and ``phi_p`` swap searches, the distance-targeted search
(``unifdist``/``betadist``) and its hybrid with Latin hypercubes
(``lhsbeta``).  Every search draws its random stream up front and hands it to
the compiled kernel (or the Python fallback), so results depend only on the
seed, never on the backend.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import _backend
from .distances import DistanceSet, DistanceTarget, pairwise_distances
from .errors import DesignParseError, InvalidInputError

__all__ = [
    "Design",
    "LatinSquares",
    "METHODS",
    "dist_targeted_design",
    "generate",
    "lhs_design",
    "lhs_squares",
    "lhsbeta_design",
    "maximin_design",
    "min_distance",
    "one_d_uniform",
    "phi_p",
    "phi_p_design",
    "random_design",
]

DEFAULT_ITERS = 100_000

METHODS = ("random", "lhs", "maximin", "phip", "unifdist", "betadist", "lhsbeta")


@dataclass(frozen=True)
class Design:
    """An ``n x d`` design in ``[0, 1]^d`` plus how it was made.

    ``trace`` holds the search objective per iteration for the swap
    searches (length ``S + 1``) and is ``None`` otherwise.
    """

    X: np.ndarray
    method: str
    params: dict = field(default_factory=dict)
    seed: int | None = None
    trace: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
            raise InvalidInputError(f"design must be n x d with n, d >= 1, got {X.shape}")
        if not np.all(np.isfinite(X)):
            raise InvalidInputError("design contains nonfinite values")
        if X.min() < 0.0 or X.max() > 1.0:
            raise InvalidInputError("design coordinates must lie in [0, 1]")
        object.__setattr__(self, "X", X)

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def d(self):
        return self.X.shape[1]

    def provenance(self):
        return {"method": self.method, "params": dict(self.params), "seed": self.seed}

    def to_json(self):
        doc = {"n": self.n, "d": self.d, "provenance": self.provenance(), "X": self.X.tolist()}
        return json.dumps(doc, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text):
        try:
            doc = json.loads(text)
            prov = doc.get("provenance", {})
            return cls(
                np.array(doc["X"], dtype=float),
                prov.get("method", "unknown"),
                prov.get("params", {}),
                prov.get("seed"),
            )
        except (ValueError, KeyError, TypeError) as exc:
            raise DesignParseError(f"bad design JSON: {exc}") from exc

    def to_csv(self):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        for row in self.X:
            writer.writerow([repr(float(v)) for v in row])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text, method="file"):
        rows = []
        width = None
        for lineno, line in enumerate(text.splitlines(), start=1):
            if not line.strip():
                continue
            fields = [f.strip() for f in line.split(",")]
            try:
                row = [float(f) for f in fields]
            except ValueError:
                raise DesignParseError(f"non-numeric value in {line!r}", lineno) from None
            if width is None:
                width = len(row)
            elif len(row) != width:
                raise DesignParseError(f"expected {width} columns, got {len(row)}", lineno)
            if not all(math.isfinite(v) for v in row):
                raise DesignParseError("nonfinite value", lineno)
            if not all(0.0 <= v <= 1.0 for v in row):
                raise DesignParseError("coordinate outside [0, 1]", lineno)
            rows.append(row)
        if not rows:
            raise DesignParseError("empty design file", 1)
        return cls(np.array(rows), method)


@dataclass(frozen=True)
class LatinSquares:
    """Latin hypercube as 1-based bin indices ``L`` plus in-bin offsets."""

    L: np.ndarray
    jitter: np.ndarray

    @property
    def X(self):
        n = self.L.shape[0]
        return ((self.L - 1).astype(float) + self.jitter) / n

    def is_valid(self):
        n = self.L.shape[0]
        want = np.arange(1, n + 1)
        return all(np.array_equal(np.sort(col), want) for col in self.L.T)


def _rng(seed):
    return np.random.default_rng(seed)


def _seed_tag(seed):
    return int(seed) if isinstance(seed, (int, np.integer)) else None


def _check_nd(n, d, min_n=2):
    if int(n) != n or int(d) != d:
        raise InvalidInputError("n and d must be integers")
    if n < min_n:
        raise InvalidInputError(f"n must be >= {min_n}")
    if d < 1:
        raise InvalidInputError("d must be >= 1")
    return int(n), int(d)


def _check_iters(S):
    if S < 0 or int(S) != S:
        raise InvalidInputError("iteration count S must be a nonnegative integer")
    return int(S)


def random_design(n, d, seed=None):
    """``n`` i.i.d. uniform points in ``[0, 1]^d``."""
    n, d = _check_nd(n, d)
    X = _rng(seed).random((n, d))
    return Design(X, "random", {"n": n, "d": d}, _seed_tag(seed))


def lhs_squares(n, d, rng):
    L = np.empty((n, d), dtype=np.int64)
    for k in range(d):
        L[:, k] = rng.permutation(n) + 1
    jitter = rng.random((n, d))
    return LatinSquares(L, jitter)


def lhs_design(n, d, seed=None):
    """Random Latin hypercube: ``d`` permutations of the bins, jittered within."""
    n, d = _check_nd(n, d, min_n=1)
    sq = lhs_squares(n, d, _rng(seed))
    return Design(sq.X, "lhs", {"n": n, "d": d}, _seed_tag(seed))


def _single_point_stream(rng, n, d, S):
    idx = rng.integers(n, size=S).astype(np.int64)
    props = rng.random((S, d))
    return idx, props


def maximin_design(n, d, S=DEFAULT_ITERS, seed=None, backend=None):
    """Greedy random-replacement search for a maximin design.

    A proposal replaces one point by a fresh uniform draw and is kept when
    the sorted pair-distance vector grows lexicographically (larger minimum
    distance first, ties broken by the next-smallest).  ``trace`` records the
    minimum distance.
    """
    n, d = _check_nd(n, d)
    S = _check_iters(S)
    kern = backend or _backend.kernels
    rng = _rng(seed)
    X = np.ascontiguousarray(rng.random((n, d)))
    idx, props = _single_point_stream(rng, n, d, S)
    trace = np.empty(S + 1)
    kern.maximin_search(X, idx, props, trace)
    return Design(X, "maximin", {"n": n, "d": d, "S": S}, _seed_tag(seed), trace)


def phi_p(X, p=2.0):
    """Morris-Mitchell criterion ``(sum_k J_k d_k^-p)^(1/p)``; ``inf`` with duplicates.

    ``X`` is a design or an already computed :class:`DistanceSet`.
    """
    dist = X.values if isinstance(X, DistanceSet) else pairwise_distances(X).values
    if np.any(dist == 0.0):
        return math.inf
    return float(np.sum(dist ** (-float(p))) ** (1.0 / p))


def phi_p_design(n, d, p=2.0, S=DEFAULT_ITERS, seed=None, backend=None):
    """Greedy random-replacement search minimizing ``phi_p``."""
    n, d = _check_nd(n, d)
    S = _check_iters(S)
    if p < 1:
        raise InvalidInputError("p must be >= 1")
    kern = backend or _backend.kernels
    rng = _rng(seed)
    X = np.ascontiguousarray(rng.random((n, d)))
    idx, props = _single_point_stream(rng, n, d, S)
    trace = np.empty(S + 1)
    kern.phip_search(X, float(p), idx, props, trace)
    return Design(X, "phip", {"n": n, "d": d, "p": float(p), "S": S}, _seed_tag(seed), trace)


def _target_args(target):
    return target.code, target.alpha, target.beta, target.scale, target.log_norm


def dist_targeted_design(n, d, target, S=DEFAULT_ITERS, seed=None, backend=None):
    """Random design refined so its pair distances match ``target`` in KS distance.

    Each iteration replaces a random point by a fresh uniform draw and keeps
    it only if the KS distance strictly decreases.  ``trace`` records the KS
    distance.
    """
    n, d = _check_nd(n, d)
    S = _check_iters(S)
    if target.d != d:
        raise InvalidInputError(f"target built for d={target.d}, design has d={d}")
    kern = backend or _backend.kernels
    rng = _rng(seed)
    X = np.ascontiguousarray(rng.random((n, d)))
    idx, props = _single_point_stream(rng, n, d, S)
    trace = np.empty(S + 1)
    kern.ksd_search(X, *_target_args(target), idx, props, trace)
    method = "betadist" if target.family == "beta" else "unifdist"
    params = {"n": n, "d": d, "S": S, "target": target.describe()}
    return Design(X, method, params, _seed_tag(seed), trace)


def lhsbeta_design(n, d, target, S=DEFAULT_ITERS, seed=None, backend=None, return_squares=False):
    """Latin hypercube refined toward a pair-distance target.

    Each iteration swaps the bins of two random points in one random
    dimension, re-jitters both points in every dimension and keeps the move
    only if the KS distance strictly decreases.  The Latin property holds
    after every iteration.
    """
    n, d = _check_nd(n, d)
    S = _check_iters(S)
    if target.d != d:
        raise InvalidInputError(f"target built for d={target.d}, design has d={d}")
    kern = backend or _backend.kernels
    rng = _rng(seed)
    sq = lhs_squares(n, d, rng)
    L = np.ascontiguousarray(sq.L)
    J = np.ascontiguousarray(sq.jitter)
    X = np.ascontiguousarray(sq.X)
    pi = rng.integers(n, size=S).astype(np.int64)
    pj = ((pi + 1 + rng.integers(n - 1, size=S)) % n).astype(np.int64)
    pk = rng.integers(d, size=S).astype(np.int64)
    rejit = rng.random((S, 2 * d))
    trace = np.empty(S + 1)
    kern.lhs_ksd_search(L, J, X, *_target_args(target), pi, pj, pk, rejit, trace)
    params = {"n": n, "d": d, "S": S, "target": target.describe()}
    design = Design(X, "lhsbeta", params, _seed_tag(seed), trace)
    if return_squares:
        return design, LatinSquares(L, J)
    return design


def min_distance(X):
    return float(pairwise_distances(X).values[0])


def one_d_uniform(X):
    """True when every 1-d projection has exactly one point per ``1/n`` bin."""
    X = np.asarray(X, dtype=float)
    n = X.shape[0]
    bins = np.minimum(np.floor(X * n).astype(int), n - 1)
    want = np.arange(n)
    return all(np.array_equal(np.sort(col), want) for col in bins.T)


def generate(method, n, d, seed=None, S=DEFAULT_ITERS, alpha=None, beta=None, p=2.0,
             backend=None):
    """Build a design by method tag (see ``METHODS``)."""
    if method == "random":
        return random_design(n, d, seed)
    if method == "lhs":
        return lhs_design(n, d, seed)
    if method == "maximin":
        return maximin_design(n, d, S, seed, backend)
    if method in ("phip", "minphi2"):
        return phi_p_design(n, d, p, S, seed, backend)
    if method == "unifdist":
        return dist_targeted_design(n, d, DistanceTarget.uniform(d), S, seed, backend)
    if method in ("betadist", "lhsbeta"):
        if alpha is None or beta is None:
            raise InvalidInputError(f"{method} needs Beta shapes alpha and beta")
        target = DistanceTarget.beta_target(alpha, beta, d)
        if method == "betadist":
            return dist_targeted_design(n, d, target, S, seed, backend)
        return lhsbeta_design(n, d, target, S, seed, backend)
    raise InvalidInputError(f"unknown design method {method!r}; choose from {METHODS}")
