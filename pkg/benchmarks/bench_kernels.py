#!/usr/bin/env python3
"""Benchmark the compiled kernels against the numpy fallback.

Times the three hot paths on experiment-sized inputs: batch bilinear
interpolation, the polar Laplacian stencil, and the full moving-plane scan.

    python benchmarks/bench_kernels.py [--grid 129,256] [--queries 2000000]
"""

import argparse
import time

import numpy as np

from gnnlab import _kernels_py

try:
    from gnnlab import _kernels as _kernels_c
except ImportError:
    _kernels_c = None

from gnnlab.grid import build_grid


def timeit(fn, repeats=5):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--grid", default="129,256")
    parser.add_argument("--queries", type=int, default=2_000_000)
    args = parser.parse_args()
    n_r, n_theta = (int(v) for v in args.grid.split(","))

    grid = build_grid(n_r, n_theta)
    rng = np.random.default_rng(0)
    values = np.cumsum(rng.standard_normal(grid.shape()), axis=0) * 0.01
    values[0, :] = values[0, 0]

    fr = rng.uniform(0.0, n_r - 1, args.queries)
    ft = rng.uniform(0.0, n_theta, args.queries)

    x, y = grid.cartesian()
    interior = slice(1, n_r - 1)
    px = x[interior, :].ravel().copy()
    py = y[interior, :].ravel().copy()
    pu = values[interior, :].ravel().copy()
    lambdas = np.arange(0.0, 1.0, grid.dr)

    backends = [("python", _kernels_py)]
    if _kernels_c is not None:
        backends.append(("compiled", _kernels_c))
    else:
        print("compiled extension not available; timing the fallback only")

    cases = {
        "interp_fractional": lambda k: k.interp_fractional(values, fr, ft),
        "laplace_apply": lambda k: k.laplace_apply(values),
        "plane_scan_min": lambda k: k.plane_scan_min(
            values, px, py, pu, lambdas, 1e-14
        ),
    }

    print(f"grid {n_r}x{n_theta}, {args.queries} interpolation queries")
    print(f"{'kernel':<20} " + " ".join(f"{name:>12}" for name, _ in backends) + "  speedup")
    for case, runner in cases.items():
        times = [timeit(lambda k=kern: runner(k)) for _, kern in backends]
        ratio = times[0] / times[-1] if len(times) > 1 else float("nan")
        cols = " ".join(f"{t * 1e3:>10.1f}ms" for t in times)
        print(f"{case:<20} {cols}  {ratio:>6.2f}x")

    # cross-backend agreement on the scan results
    if _kernels_c is not None:
        a, _ = _kernels_c.plane_scan_min(values, px, py, pu, lambdas, 1e-14)
        b, _ = _kernels_py.plane_scan_min(values, px, py, pu, lambdas, 1e-14)
        finite = np.isfinite(b)
        print(f"max |scan difference|: {np.abs(a[finite] - b[finite]).max():.2e}")


if __name__ == "__main__":
    main()
