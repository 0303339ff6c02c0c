"""Benchmark the compiled hot kernels against the pure-numpy fallback.

The accelerator flag is read once at import, so this script re-invokes
itself in a subprocess per mode (TAILGAN_NO_NUMBA unset vs set) and
merges the timings into one comparison table. Compiled timings exclude
the first warmup call, which pays the compilation cost.

Usage: python benchmarks/bench_kernels.py [--sizes 100 300 600] [--repeats 3]
"""

from __future__ import annotations

import argparse
import os
import subprocess
import sys
import time


def _bench_transport(n, repeats, rng):
    from tailgan.metrics import w2_distance

    A = rng.normal(size=(n, 8))
    B = rng.normal(size=(n, 8)) + 0.3
    w2_distance(A[: min(n, 32)], B[: min(n, 32)])  # warmup/compile
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        w2_distance(A, B)
        best = min(best, time.perf_counter() - start)
    return best


def _bench_subset_max(n_points, repeats, rng):
    from tailgan.angular import enumerate_subsets, subset_max_weighted

    d = 30
    points = rng.dirichlet(np.ones(d), size=n_points)
    weights = np.full(n_points, 1.0 / n_points)
    subsets = enumerate_subsets(d, 3, cap=5000)[0]
    subset_max_weighted(points[:32], weights[:32] * (n_points / 32), subsets)
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        subset_max_weighted(points, weights, subsets)
        best = min(best, time.perf_counter() - start)
    return best


def run_mode(sizes, repeats):
    import numpy

    global np
    np = numpy
    rng = np.random.default_rng(0)
    for n in sizes:
        print(f"transport\t{n}\t{_bench_transport(n, repeats, rng):.6f}")
    for n in (2000, 20000):
        print(f"subset_max\t{n}\t{_bench_subset_max(n, repeats, rng):.6f}")


def collect(mode, sizes, repeats):
    env = os.environ.copy()
    if mode == "numpy":
        env["TAILGAN_NO_NUMBA"] = "1"
    else:
        env.pop("TAILGAN_NO_NUMBA", None)
    cmd = [
        sys.executable, os.path.abspath(__file__), "--mode", mode,
        "--repeats", str(repeats), "--sizes", *[str(s) for s in sizes],
    ]
    out = subprocess.run(
        cmd, env=env, capture_output=True, text=True, check=True
    ).stdout
    timings = {}
    for line in out.strip().splitlines():
        kernel, size, seconds = line.split("\t")
        timings[(kernel, int(size))] = float(seconds)
    return timings


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--sizes", nargs="+", type=int, default=[100, 300, 600])
    parser.add_argument("--repeats", type=int, default=3)
    parser.add_argument("--mode", choices=["numba", "numpy"], default=None)
    args = parser.parse_args()

    if args.mode is not None:
        run_mode(args.sizes, args.repeats)
        return

    numba_t = collect("numba", args.sizes, args.repeats)
    numpy_t = collect("numpy", args.sizes, args.repeats)
    print(f"{'kernel':<12}{'size':>8}{'numpy (s)':>12}{'numba (s)':>12}{'speedup':>10}")
    for key in sorted(numba_t):
        kernel, size = key
        tn = numpy_t[key]
        tj = numba_t[key]
        print(f"{kernel:<12}{size:>8}{tn:>12.4f}{tj:>12.4f}{tn / tj:>10.2f}x")


if __name__ == "__main__":
    main()
