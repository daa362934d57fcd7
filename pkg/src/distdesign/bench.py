"""Monte Carlo studies comparing design methods.

Three studies are provided:

* ``logmse_study``: how well the lengthscale MLE recovers a known ``theta``
  from each design family, across a grid of true values.
* ``alm_study``: prediction error along an ALM (variance-seeking) run on
  the Gramacy-Lee surface, started from each design family.
* ``bo_study``: best value found by EI on a randomly scaled Griewank
  function, started from each design family, with paired t-tests.

Every random draw comes from ``stream(seed, *keys)``: a ``SeedSequence``
with the master seed as entropy and the cell coordinates as spawn key.
Methods sharing a pairing key consume the same responses, noise or scale,
and results do not depend on the number of worker processes.
"""
from __future__ import annotations

import csv
import datetime as _dt
import io
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import __version__, gp
from .designs import METHODS, generate
from .errors import DegenerateDataError, InvalidInputError, NumericalError
from .sequential import gramacy_lee, griewank, run_alm, run_bo
from .stats import paired_ttest
from .tuner import catalog_lookup, detrend_from_samples

__all__ = [
    "AlmResult",
    "BenchRecord",
    "BoResult",
    "LogmseResult",
    "StudyConfig",
    "alm_study",
    "bo_study",
    "logmse_study",
    "run_study",
    "stream",
    "write_manifest",
]

LOG_FLOOR = math.log(1e-12)
DEFAULT_METHODS = {
    "logmse": ("random", "lhs", "maximin", "phip", "unifdist", "betadist", "lhsbeta"),
    "alm": ("random", "lhs", "betadist", "lhsbeta", "maximin"),
    "bo": ("random", "lhs", "maximin", "betadist", "lhsbeta"),
}
ALM_SHAPE = (2.0, 5.0)
# first spawn-key entry per kind of draw
_K_RESPONSE, _K_DESIGN, _K_NOISE, _K_SCALE, _K_RUN = range(5)


def stream(seed, *keys):
    """Independent RNG for the cell identified by ``keys`` under master ``seed``."""
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in keys)))


def _method_key(method):
    return METHODS.index(method)


@dataclass(frozen=True)
class StudyConfig:
    """Scale and randomness of a study.

    ``n`` defaults to ``2^(d+1)`` for the logMSE study and to the initial
    design size 8 for the sequential studies.  ``shapes`` maps a method to
    its Beta shapes; missing entries come from the catalog (or the ALM
    default ``(2, 5)``).  ``design_iters`` is the swap-search length for
    every searched design.
    """

    name: str = "logmse"
    dims: tuple = (2,)
    reps: int = 100
    methods: tuple | None = None
    seed: int = 0
    n: int | None = None
    design_iters: int = 2000
    shapes: dict = field(default_factory=dict)
    T: int = 30
    total_n: int = 64
    noise_sd: float = 0.01
    checkpoints: tuple = (25,)
    threads: int = 1

    def __post_init__(self):
        if self.name not in DEFAULT_METHODS:
            raise InvalidInputError(f"unknown study {self.name!r}")
        if self.reps < 1 or (self.name != "alm" and self.reps < 2):
            raise InvalidInputError("paired t-tests need reps >= 2")
        for m in self.method_list:
            if m not in METHODS:
                raise InvalidInputError(f"unknown design method {m!r}")
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        object.__setattr__(self, "checkpoints", tuple(int(c) for c in self.checkpoints))

    @property
    def method_list(self):
        return tuple(self.methods) if self.methods else DEFAULT_METHODS[self.name]

    def size(self, d):
        if self.n is not None:
            return int(self.n)
        return 2 ** (d + 1) if self.name == "logmse" else 8

    def shape(self, method, n, d):
        if method in self.shapes:
            return tuple(float(v) for v in self.shapes[method])
        if self.name == "alm":
            return ALM_SHAPE
        hit = catalog_lookup(n, d)
        return (hit.alpha, hit.beta)

    def design(self, method, n, d, rng):
        a, b = self.shape(method, n, d) if method in ("betadist", "lhsbeta") else (None, None)
        return generate(method, n, d, rng, S=self.design_iters, alpha=a, beta=b)

    def to_dict(self):
        doc = asdict(self)
        doc["methods"] = list(self.method_list)
        doc["shapes"] = {m: list(self.shape(m, self.size(d), d)) for d in self.dims
                         for m in self.method_list if m in ("betadist", "lhsbeta")}
        return doc


@dataclass(frozen=True)
class BenchRecord:
    """One repetition's metric for one method; equal ``pairing_key`` means paired."""

    method: str
    rep: int
    metric: np.ndarray
    pairing_key: tuple


def _map(fn, tasks, threads):
    if threads > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, tasks))
    return [fn(t) for t in tasks]


# -- lengthscale recovery ---------------------------------------------------------


@dataclass
class LogmseResult:
    """logMSE per method (rows) and grid value (columns), raw and standardized."""

    d: int
    n: int
    theta_grid: np.ndarray
    methods: tuple
    raw: np.ndarray
    standardized: np.ndarray
    failures: int
    ranking: list

    def mean_standardized(self):
        return dict(zip(self.methods, self.standardized.mean(axis=1)))

    def p_value(self, better, worse):
        """Lower-tail paired t-test over the grid: is ``better`` below ``worse``?"""
        i, j = self.methods.index(better), self.methods.index(worse)
        return paired_ttest(self.standardized[i], self.standardized[j])

    def tables(self):
        head = ["t", "theta", *self.methods]
        raw = [head] + [[t + 1, self.theta_grid[t], *self.raw[:, t]] for t in range(self.theta_grid.size)]
        std = [head] + [[t + 1, self.theta_grid[t], *self.standardized[:, t]]
                        for t in range(self.theta_grid.size)]
        rank = [["rank", "method", "mean_standardized", "p_vs_next"]] + [
            [k + 1, m, s, "" if p is None else p] for k, (m, s, p) in enumerate(self.ranking)
        ]
        return {
            f"study-logmse-d{self.d}-n{self.n}.csv": raw,
            f"study-logmse-standardized-d{self.d}-n{self.n}.csv": std,
            f"study-logmse-ranking-d{self.d}-n{self.n}.csv": rank,
        }


def _mle_estimator(X, Y, theta_true, bounds):
    return gp.mle_theta(X, Y, bounds=bounds).theta


def _logmse_cell(task):
    config, d, n, t, theta, estimator = task
    methods = config.method_list
    bounds = (gp.SQRT_EPS, math.sqrt(d))
    kernel = gp.Kernel(theta, 1.0)
    sq = np.full((len(methods), config.reps), np.nan)
    for i in range(config.reps):
        z = stream(config.seed, _K_RESPONSE, d, t, i).standard_normal(n)
        for m, method in enumerate(methods):
            X = config.design(method, n, d, stream(config.seed, _K_DESIGN, d, t, i, _method_key(method))).X
            try:
                Y = gp.simulate_mvn(X, kernel, z=z)
                sq[m, i] = (estimator(X, Y, theta, bounds) - theta) ** 2
            except (DegenerateDataError, NumericalError):
                pass
    return sq


def _log_sum(values):
    s = float(np.sum(values))
    return math.log(s) if s > 0 else LOG_FLOOR


def logmse_study(config, estimator=None):
    """Lengthscale-recovery study; one :class:`LogmseResult` per dimension.

    For each grid value ``theta_t`` and repetition, every method gets its
    own design but the same standard-normal draw ``z``, so responses differ
    only through the design.  ``logMSE_t = log(sum_i (theta_hat - theta_t)^2)``
    with a zero sum mapped to ``log(1e-12)``.  A repetition where any method's
    fit fails is dropped for all methods and counted.  Standardization pools
    all methods at each ``theta_t``; the t-tests pair on ``theta_t``.
    """
    estimator = estimator or _mle_estimator
    results = []
    for d in config.dims:
        n = config.size(d)
        grid = np.linspace(0.1, math.sqrt(d), config.T)
        tasks = [(config, d, n, t, float(theta), estimator) for t, theta in enumerate(grid)]
        cells = _map(_logmse_cell, tasks, config.threads)
        methods = config.method_list
        raw = np.empty((len(methods), config.T))
        failures = 0
        for t, sq in enumerate(cells):
            ok = np.all(np.isfinite(sq), axis=0)
            failures += int(np.sum(~ok))
            raw[:, t] = [_log_sum(row[ok]) for row in sq]
        surface = detrend_from_samples(grid, raw.T)
        std = (raw - surface.mu_t) / surface.sigma_t
        order = np.argsort(std.mean(axis=1), kind="stable")
        ranking = []
        for k, m in enumerate(order):
            p = paired_ttest(std[m], std[order[k + 1]]) if k + 1 < len(order) else None
            ranking.append((methods[m], float(std[m].mean()), p))
        results.append(LogmseResult(d, n, grid, methods, raw, std, failures, ranking))
    return results


# -- ALM on Gramacy-Lee ------------------------------------------------------------


@dataclass
class AlmResult:
    """RMSPE traces (reps x steps) per method, summarized by mean and 90% quantile."""

    n_init: int
    total_n: int
    methods: tuple
    rmspe: dict

    def mean(self, method):
        return self.rmspe[method].mean(axis=0)

    def q90(self, method):
        return np.quantile(self.rmspe[method], 0.9, axis=0)

    def records(self):
        return [BenchRecord(m, r, tr, ("alm", r)) for m in self.methods
                for r, tr in enumerate(self.rmspe[m])]

    def tables(self):
        head = ["n"] + [f"{m}_{s}" for m in self.methods for s in ("mean", "q90")]
        rows = [head]
        stats = {m: (self.mean(m), self.q90(m)) for m in self.methods}
        for k, n in enumerate(range(self.n_init, self.total_n + 1)):
            rows.append([n] + [v for m in self.methods for v in (stats[m][0][k], stats[m][1][k])])
        return {f"study-alm-d2-n{self.total_n}.csv": rows}


def _alm_cell(task):
    config, rep = task
    n0 = config.size(2)
    out = {}
    for method in config.method_list:
        design = config.design(method, n0, 2, stream(config.seed, _K_DESIGN, 2, rep, _method_key(method)))
        # same run seed for every method: shared noise stream and start pools
        run_seed = np.random.SeedSequence(config.seed, spawn_key=(_K_NOISE, 2, rep))
        out[method] = run_alm(gramacy_lee, design, config.total_n, config.noise_sd, run_seed).metric
    return out


def alm_study(config):
    """ALM study on Gramacy-Lee over ``[-2, 4]^2`` with Gaussian noise."""
    if 2 not in config.dims:
        raise InvalidInputError("the ALM study is two-dimensional")
    cells = _map(_alm_cell, [(config, r) for r in range(config.reps)], config.threads)
    rmspe = {m: np.array([c[m] for c in cells]) for m in config.method_list}
    return AlmResult(config.size(2), config.total_n, config.method_list, rmspe)


# -- EI on Griewank ----------------------------------------------------------------


@dataclass
class BoResult:
    """Best-so-far values at each checkpoint plus pairwise p-value matrices.

    ``pvalues[n][i, j]`` is the lower-tail paired test that method ``i``
    finds smaller values than method ``j`` after ``n`` evaluations.
    """

    d: int
    n_init: int
    methods: tuple
    checkpoints: tuple
    bounds: np.ndarray
    best: dict
    pvalues: dict

    def p_value(self, row, col, checkpoint):
        return float(self.pvalues[checkpoint][self.methods.index(row), self.methods.index(col)])

    def tables(self):
        out = {}
        for c in self.checkpoints:
            rows = [["method", *self.methods]]
            for i, m in enumerate(self.methods):
                rows.append([m, *("" if i == j else self.pvalues[c][i, j] for j in range(len(self.methods)))])
            out[f"study-bo-d{self.d}-n{c}.csv"] = rows
        rows = [["rep", "b", *(f"{m}_n{c}" for c in self.checkpoints for m in self.methods)]]
        for r, b in enumerate(self.bounds):
            rows.append([r, b, *(self.best[c][m][r] for c in self.checkpoints for m in self.methods)])
        out[f"study-bo-best-d{self.d}-n{self.n_init}.csv"] = rows
        return out


def _bo_cell(task):
    config, d, rep = task
    n0 = config.size(d)
    b = float(stream(config.seed, _K_SCALE, d, rep).uniform(0.0, 10.0))
    total = max(config.checkpoints)
    out = {}
    for method in config.method_list:
        design = config.design(method, n0, d, stream(config.seed, _K_DESIGN, d, rep, _method_key(method)))
        run_seed = np.random.SeedSequence(config.seed, spawn_key=(_K_RUN, d, rep))
        out[method] = run_bo(griewank, design, total, run_seed, box=(-b, b)).metric
    return b, out


def bo_study(config):
    """EI study on Griewank over ``[-b, b]^d`` with ``b ~ Unif(0, 10)`` shared per rep."""
    results = []
    for d in config.dims:
        n0 = config.size(d)
        if min(config.checkpoints) < n0:
            raise InvalidInputError("checkpoints must be at least the initial design size")
        cells = _map(_bo_cell, [(config, d, r) for r in range(config.reps)], config.threads)
        methods = config.method_list
        bounds = np.array([c[0] for c in cells])
        best, pvalues = {}, {}
        for c in config.checkpoints:
            best[c] = {m: np.array([cell[1][m][c - n0] for cell in cells]) for m in methods}
            P = np.full((len(methods), len(methods)), np.nan)
            for i, a in enumerate(methods):
                for j, b in enumerate(methods):
                    if i != j:
                        P[i, j] = paired_ttest(best[c][a], best[c][b])
            pvalues[c] = P
        results.append(BoResult(d, n0, methods, config.checkpoints, bounds, best, pvalues))
    return results


# -- output ------------------------------------------------------------------------


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_table(path, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    with open(path, "w", newline="") as fh:
        fh.write(buf.getvalue())


def write_manifest(path, config, files, extra=None):
    doc = {
        "study": config.name,
        "config": config.to_dict(),
        "seed": config.seed,
        "version": __version__,
        "numpy": np.__version__,
        "files": sorted(files),
        "created": _dt.datetime.now(_dt.timezone.utc).isoformat(),
    }
    doc.update(extra or {})
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)


def run_study(config, outdir):
    """Run a study, write its CSV tables and ``manifest-<name>.json`` into ``outdir``.

    Dimensions run one at a time and their tables are written as soon as
    they finish; an interrupt still leaves a manifest listing what was done.
    """
    os.makedirs(outdir, exist_ok=True)
    runner = {"logmse": logmse_study, "alm": alm_study, "bo": bo_study}[config.name]
    results, files, extra = [], [], {"complete": False}
    try:
        for d in config.dims:
            sub = runner(replace(config, dims=(d,)))
            for res in sub if isinstance(sub, list) else [sub]:
                for name, rows in res.tables().items():
                    write_table(os.path.join(outdir, name), rows)
                    files.append(name)
                if isinstance(res, LogmseResult):
                    extra.setdefault("failures", {})[f"d{res.d}"] = res.failures
                results.append(res)
        extra["complete"] = True
    finally:
        write_manifest(os.path.join(outdir, f"manifest-{config.name}.json"), config, files, extra)
    return results, files
