"""Time the swap-search kernels: compiled extension against the Python fallback.

    python benchmarks/bench_kernels.py [--iters 20000] [--repeat 3]

Both backends consume identical pre-drawn proposals, so each pair of runs
also checks that the designs agree bit for bit.
"""
import argparse
import time

import numpy as np

from distdesign import _backend
from distdesign.designs import generate

CASES = [
    ("maximin", 16, 2),
    ("phip", 16, 2),
    ("betadist", 16, 2),
    ("unifdist", 32, 3),
    ("lhsbeta", 16, 3),
]


def _time(method, n, d, iters, backend, repeat):
    best, design = float("inf"), None
    for _ in range(repeat):
        t0 = time.perf_counter()
        design = generate(method, n, d, seed=1, S=iters, alpha=2, beta=5, backend=backend)
        best = min(best, time.perf_counter() - t0)
    return best, design


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--iters", type=int, default=20_000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    if "cython" not in _backend.available():
        raise SystemExit("compiled kernels not built; run `pip install -e . --no-build-isolation`")
    py, cy = _backend.get("python"), _backend.get("cython")
    print(f"{'method':<10}{'n':>5}{'d':>3}{'python s':>11}{'cython s':>11}{'speedup':>9}  identical")
    for method, n, d in CASES:
        t_py, a = _time(method, n, d, args.iters, py, args.repeat)
        t_cy, b = _time(method, n, d, args.iters, cy, args.repeat)
        same = np.array_equal(a.X, b.X)
        print(f"{method:<10}{n:>5}{d:>3}{t_py:>11.3f}{t_cy:>11.3f}{t_py / t_cy:>8.1f}x  {same}")


if __name__ == "__main__":
    main()
