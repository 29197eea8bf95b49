#!/usr/bin/env python3
"""Benchmark the compiled stencil kernel against the numpy fallback.

Times the raw tau-derivative kernel at several grid sizes and a full
geometry rebuild (the hot path of the finite-difference oracles and the
convergence sweeps) under each backend.

    python benchmarks/bench_kernels.py [--repeats N]
"""

import argparse
import time

import numpy as np

from stringlab import backend
from stringlab.grid import WorldsheetGrid
from stringlab.solutions import pulsating_circular_string


def time_call(fn, repeats: int) -> float:
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def bench_fd4(repeats: int) -> None:
    print("fd4_axis0 kernel (best of {} runs)".format(repeats))
    header = f"{'shape':>14s}" + "".join(f"{name:>14s}" for name in backend.available_backends())
    if backend.HAVE_COMPILED:
        header += f"{'speedup':>10s}"
    print(header)
    rng = np.random.default_rng(0)
    for shape in [(65, 128), (129, 256), (257, 512), (513, 2048)]:
        arr = np.ascontiguousarray(rng.normal(size=shape))
        times = {}
        for name in backend.available_backends():
            fn = backend._IMPLS[name].fd4_axis0
            fn(arr, 1e-3)  # warm up
            times[name] = time_call(lambda: fn(arr, 1e-3), repeats)
        row = f"{str(shape):>14s}" + "".join(f"{times[n] * 1e6:>12.1f}us" for n in times)
        if "compiled" in times:
            row += f"{times['numpy'] / times['compiled']:>9.2f}x"
        print(row)


def bench_geometry(repeats: int) -> None:
    print("\nfull geometry rebuild (best of {} runs)".format(repeats))
    sol = pulsating_circular_string(1.0)
    for n_tau, n_sigma in [(129, 32), (257, 64)]:
        grid = WorldsheetGrid(n_tau, n_sigma, 0.1, 0.9)
        times = {}
        for name in backend.available_backends():
            backend.use(name)
            sol.geometry(grid)  # warm up
            times[name] = time_call(lambda: sol.geometry(grid), repeats)
        row = f"{n_tau:>5d}x{n_sigma:<4d}" + "".join(
            f"{name}={times[name] * 1e3:8.2f}ms  " for name in times
        )
        if "compiled" in times:
            row += f"speedup={times['numpy'] / times['compiled']:.2f}x"
        print(row)
    backend.use("compiled" if backend.HAVE_COMPILED else "numpy")


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=7)
    args = parser.parse_args()
    print(f"backends available: {backend.available_backends()}")
    bench_fd4(args.repeats)
    bench_geometry(args.repeats)


if __name__ == "__main__":
    main()
