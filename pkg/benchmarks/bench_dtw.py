"""Benchmark the numba and numpy kernels behind alignment and noise.

Times the banded dynamic-programming fill (full window and a fixed-width
corridor) and the recursive Gaussian noise generator in both forms, then
prints a table with speedups.  Run from the repository root:

    python3 benchmarks/bench_dtw.py
    python3 benchmarks/bench_dtw.py --sizes 500 1000 4000 --repeats 5

With FAASTRACE_NO_NUMBA=1 only the numpy side is timed (the jit names
fall back to plain Python and would not measure compiled code).
"""
import argparse
import time

import numpy as np

from faastrace._accel import USE_NUMBA
from faastrace._dtw import _fill_jit, _fill_numpy, full_window
from faastrace.workload import (
    _fgn_autocovariance,
    _hosking_fill,
    _hosking_numpy,
)


def best_of(repeats, func, *args):
    times = []
    for _ in range(repeats):
        started = time.perf_counter()
        func(*args)
        times.append(time.perf_counter() - started)
    return min(times)


def band_window(n, m, half_width):
    rows = np.arange(n, dtype=np.int64)
    center = rows * (m - 1) // max(n - 1, 1)
    lo = np.maximum(center - half_width, 0)
    hi = np.minimum(center + half_width, m - 1)
    lo[0] = 0
    return lo, hi


def hosking_args(n, hurst, seed):
    gamma = _fgn_autocovariance(hurst, n)
    noise = np.random.default_rng(seed).standard_normal(n)
    return gamma, noise


def run_dtw_case(name, n, lo, hi, repeats, rows):
    rng = np.random.default_rng(7)
    a = np.cumsum(rng.standard_normal(n))
    b = np.cumsum(rng.standard_normal(n))
    width = int(np.max(hi - lo) + 1)
    t_numpy = best_of(repeats, _fill_numpy, a, b, lo, hi, width)
    if USE_NUMBA:
        t_jit = best_of(repeats, _fill_jit, a, b, lo, hi, width)
        rows.append((f"{name} n={n}", t_jit, t_numpy, t_numpy / t_jit))
    else:
        rows.append((f"{name} n={n}", None, t_numpy, None))


def run_hosking_case(n, repeats, rows):
    gamma, noise = hosking_args(n, 0.8, seed=1)
    t_numpy = best_of(repeats, _hosking_numpy, gamma, noise)

    def jit_call():
        phi = np.zeros(n)
        prev = np.zeros(n)
        out = np.empty(n)
        _hosking_fill(gamma, noise, phi, prev, out)

    if USE_NUMBA:
        t_jit = best_of(repeats, jit_call)
        rows.append((f"hosking n={n}", t_jit, t_numpy, t_numpy / t_jit))
    else:
        rows.append((f"hosking n={n}", None, t_numpy, None))


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sizes", type=int, nargs="+", default=[500, 1000, 2000])
    parser.add_argument("--repeats", type=int, default=3)
    parser.add_argument("--band", type=int, default=40,
                        help="half-width of the banded corridor case")
    args = parser.parse_args()

    if USE_NUMBA:
        # Warm up so compilation is not timed
        n0 = 64
        lo, hi = full_window(n0, n0)
        rng = np.random.default_rng(0)
        _fill_jit(rng.standard_normal(n0), rng.standard_normal(n0), lo, hi, n0)
        gamma, noise = hosking_args(n0, 0.8, seed=0)
        _hosking_fill(gamma, noise, np.zeros(n0), np.zeros(n0), np.empty(n0))
        print("numba kernels active (set FAASTRACE_NO_NUMBA=1 for numpy only)")
    else:
        print("numpy fallback active (numba disabled or missing)")

    rows = []
    for n in args.sizes:
        lo, hi = full_window(n, n)
        run_dtw_case("dtw full", n, lo, hi, args.repeats, rows)
        lo, hi = band_window(n, n, args.band)
        run_dtw_case(f"dtw band={args.band}", n, lo, hi, args.repeats, rows)
    for n in args.sizes:
        run_hosking_case(n, args.repeats, rows)

    print(f"{'case':<24} {'numba (s)':>12} {'numpy (s)':>12} {'speedup':>9}")
    for name, t_jit, t_numpy, speedup in rows:
        jit_cell = f"{t_jit:12.6f}" if t_jit is not None else f"{'-':>12}"
        ratio_cell = f"{speedup:9.2f}" if speedup is not None else f"{'-':>9}"
        print(f"{name:<24} {jit_cell} {t_numpy:12.6f} {ratio_cell}")


if __name__ == "__main__":
    main()
