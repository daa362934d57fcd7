"""Pure-Python swap-search kernels.

Fallback for ``_kernels`` (Cython).  Both consume the same pre-drawn random
streams and perform the same floating-point operations in the same order,
so the two backends return identical designs.

All searches modify their array arguments in place and fill ``trace`` with
the objective before the first and after every iteration.
"""
import math

import numpy as np

from .distances import betainc_reg, pair_distances_to, replace_sorted

NAME = "python"


def _cdf(code, a, b, scale, log_norm, x):
    u = x / scale
    if code == 0:
        return np.clip(u, 0.0, 1.0)
    return np.array([betainc_reg(a, b, v, log_norm) for v in u])


def _ks(F):
    K = F.size
    upper = np.arange(1, K + 1) / K - F
    lower = F - np.arange(K) / K
    return max(upper.max(), lower.max())


def _init_cdf(X, code, a, b, scale, log_norm):
    n = X.shape[0]
    Fm = np.zeros((n, n))
    for i in range(n - 1):
        row = _cdf(code, a, b, scale, log_norm, pair_distances_to(X[i + 1:], X[i]))
        Fm[i, i + 1:] = row
        Fm[i + 1:, i] = row
    return Fm, np.sort(Fm[np.triu_indices(n, 1)])


def _price_move(X, Fm, sorted_cdf, moved, rows, code, a, b, scale, log_norm):
    # moved: ascending indices; rows: their proposed coordinates
    n = X.shape[0]
    mask = np.ones(n, bool)
    mask[moved] = False
    rest = np.flatnonzero(mask)
    Xnew = X.copy()
    for i, r in zip(moved, rows):
        Xnew[i] = r
    old, new, updates = [], [], []
    for pos, i in enumerate(moved):
        others = np.concatenate([rest, np.asarray(moved[pos + 1:], dtype=np.intp)])
        Fi = _cdf(code, a, b, scale, log_norm, pair_distances_to(Xnew[others], Xnew[i]))
        old.append(Fm[i, others])
        new.append(Fi)
        updates.append((i, others, Fi))
    merged = replace_sorted(sorted_cdf, np.concatenate(old), np.concatenate(new))
    return _ks(merged), merged, updates


def _commit(Fm, updates):
    for i, others, Fi in updates:
        Fm[i, others] = Fi
        Fm[others, i] = Fi


def ksd_search(X, code, a, b, scale, log_norm, idx, props, trace):
    """Single-point replacement search (random proposals), strict-decrease acceptance."""
    Fm, sorted_cdf = _init_cdf(X, code, a, b, scale, log_norm)
    cur = _ks(sorted_cdf)
    trace[0] = cur
    accepted = 0
    for s in range(idx.shape[0]):
        i = int(idx[s])
        val, merged, updates = _price_move(
            X, Fm, sorted_cdf, [i], [props[s]], code, a, b, scale, log_norm
        )
        if val < cur:
            X[i] = props[s]
            _commit(Fm, updates)
            sorted_cdf = merged
            cur = val
            accepted += 1
        trace[s + 1] = cur
    return accepted


def lhs_ksd_search(L, J, X, code, a, b, scale, log_norm, pi, pj, pk, rejit, trace):
    """Latin-square swap search with re-jitter, strict-decrease acceptance.

    ``L`` holds 1-based bin indices, ``J`` the in-bin offsets and ``X`` the
    matching coordinates ``(L - 1 + J) / n``.
    """
    n, d = X.shape
    Fm, sorted_cdf = _init_cdf(X, code, a, b, scale, log_norm)
    cur = _ks(sorted_cdf)
    trace[0] = cur
    accepted = 0
    for s in range(pi.shape[0]):
        i, j, k = int(pi[s]), int(pj[s]), int(pk[s])
        Li = L[i].copy()
        Lj = L[j].copy()
        Li[k], Lj[k] = Lj[k], Li[k]
        Ji = rejit[s, :d]
        Jj = rejit[s, d:]
        xi = ((Li - 1).astype(float) + Ji) / n
        xj = ((Lj - 1).astype(float) + Jj) / n
        if i < j:
            moved, rows = [i, j], [xi, xj]
        else:
            moved, rows = [j, i], [xj, xi]
        val, merged, updates = _price_move(
            X, Fm, sorted_cdf, moved, rows, code, a, b, scale, log_norm
        )
        if val < cur:
            L[i], L[j] = Li, Lj
            J[i], J[j] = Ji, Jj
            X[i], X[j] = xi, xj
            _commit(Fm, updates)
            sorted_cdf = merged
            cur = val
            accepted += 1
        trace[s + 1] = cur
    return accepted


def _lex_greater(new, cur):
    diff = np.flatnonzero(new != cur)
    return diff.size > 0 and new[diff[0]] > cur[diff[0]]


def maximin_search(X, idx, props, trace):
    """Single-point replacement search maximizing the sorted distance vector.

    Acceptance is lexicographic: a larger minimum distance wins, ties fall
    through to the next-smallest distance.  ``trace`` records the minimum.
    """
    n = X.shape[0]
    Dm = np.zeros((n, n))
    for i in range(n - 1):
        row = pair_distances_to(X[i + 1:], X[i])
        Dm[i, i + 1:] = row
        Dm[i + 1:, i] = row
    cur = np.sort(Dm[np.triu_indices(n, 1)])
    trace[0] = cur[0]
    accepted = 0
    for s in range(idx.shape[0]):
        i = int(idx[s])
        others = np.flatnonzero(np.arange(n) != i)
        Di = pair_distances_to(X[others], props[s])
        new = replace_sorted(cur, Dm[i, others], Di)
        if _lex_greater(new, cur):
            X[i] = props[s]
            Dm[i, others] = Di
            Dm[others, i] = Di
            cur = new
            accepted += 1
        trace[s + 1] = cur[0]
    return accepted


def _phi_sum(Dm, p):
    n = Dm.shape[0]
    total = 0.0
    for i in range(n - 1):
        for j in range(i + 1, n):
            v = Dm[i, j]
            total += math.inf if v == 0.0 else math.pow(v, -p)
    return total


def phip_search(X, p, idx, props, trace):
    """Single-point replacement search minimizing ``phi_p``; ``trace`` holds ``phi_p``."""
    n = X.shape[0]
    Dm = np.zeros((n, n))
    for i in range(n - 1):
        row = pair_distances_to(X[i + 1:], X[i])
        Dm[i, i + 1:] = row
        Dm[i + 1:, i] = row
    cur = _phi_sum(Dm, p)
    trace[0] = cur ** (1.0 / p)
    accepted = 0
    for s in range(idx.shape[0]):
        i = int(idx[s])
        others = np.flatnonzero(np.arange(n) != i)
        Di = pair_distances_to(X[others], props[s])
        old = Dm[i, others].copy()
        Dm[i, others] = Di
        Dm[others, i] = Di
        val = _phi_sum(Dm, p)
        if val < cur:
            X[i] = props[s]
            cur = val
            accepted += 1
        else:
            Dm[i, others] = old
            Dm[others, i] = old
        trace[s + 1] = cur ** (1.0 / p)
    return accepted
