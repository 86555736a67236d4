"""Jitted kernels vs the same source run uncompiled.

Usage: python3 benchmarks/bench_kernels.py [--reps 3]
Numbers are best-of-reps wall time; compile time is excluded by a warm-up call.
"""
import argparse
import time

import numpy as np

from limprophet import _kernels
from limprophet._jit import USE_NUMBA, python_version
from limprophet.walk import balanced_labels


def best_of(fn, args, reps):
    best = float("inf")
    for _ in range(reps):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def cases(rng):
    k, n, rows = 64, 256, 200
    thr = -np.sort(-rng.random((rows, k)), axis=1)
    vals = np.sort(rng.random((rows, n)), axis=1)
    lab = balanced_labels(8)
    perms = np.array([rng.permutation(7) for _ in range(2000)], dtype=np.int64)
    return {
        "rehearsal_welfare_batch (200 x n=256) *": (_kernels.rehearsal_welfare_batch, (thr, vals)),
        "rehearsal_on_labels (12870 x 16, k=9)": (_kernels.rehearsal_on_labels, (lab, 9)),
        "walk_positions (12870 x 16, k=9)": (_kernels.walk_positions, (lab, 9)),
        "rehearsal_order_welfare (2000 orders) *": (_kernels.rehearsal_order_welfare,
                                                  (thr[0, :4].copy(), vals[0, :7].copy(), perms)),
        "pm1_walk_histogram (n=16)": (_kernels.pm1_walk_histogram, (16,)),
    }


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--reps", type=int, default=3)
    args = ap.parse_args()
    if not USE_NUMBA:
        print("numba disabled (LIMPROPHET_NUMBA=0); both columns run the Python source")
    rng = np.random.default_rng(0)
    print(f"{'kernel':42s} {'jit [ms]':>10s} {'python [ms]':>12s} {'speedup':>8s}")
    for name, (fn, a) in cases(rng).items():
        fn(*a)  # compile
        fast = best_of(fn, a, args.reps)
        slow = best_of(python_version(fn), a, max(1, args.reps // 3))
        print(f"{name:42s} {fast * 1e3:10.2f} {slow * 1e3:12.1f} {slow / fast:8.0f}x")
    print("* the uncompiled outer loop still calls the compiled rehearsal_fill;")
    print("  run with LIMPROPHET_NUMBA=0 for a fully uncompiled timing")


if __name__ == "__main__":
    main()
