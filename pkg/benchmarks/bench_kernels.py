#!/usr/bin/env python3
"""Timing comparison of the compiled kernels against the numpy fallback.

Runs each hot kernel on deformation-gradient batches shaped like the
default desk-scale meshes and reports per-call times and speedups.

    python3 benchmarks/bench_kernels.py [--repeat 20]
"""

import argparse
import time

import numpy as np

from lagfsi import _kernels_py as kpy

try:
    from lagfsi import _kernels as kc
except ImportError:
    kc = None


def timeit(fn, *args, repeat=20):
    fn(*args)  # warm up
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=20)
    ap.add_argument("--cells", type=int, default=1000)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    for d, na, nq in ((2, 6, 7), (3, 10, 15)):
        nc = args.cells
        F = np.ascontiguousarray(np.eye(d) + 0.1 * rng.standard_normal((nc, nq, d, d)))
        G = np.ascontiguousarray(rng.standard_normal((nc, nq, na, d)))
        w = np.ascontiguousarray(rng.random((nc, nq)))
        aaT = np.ascontiguousarray(np.einsum("...ij,...kj->...ik", F, F))
        valp = np.ascontiguousarray(rng.random((nq, d + 1)))
        P = kpy.pk1(F, 1.0, 1.0, 1)

        cases = [
            ("inv_det", (F,)),
            ("pk1", (F, 1.0, 1.0, 1)),
            ("elem_residual", (P, G, w)),
            ("elem_tangent", (F, G, w, 1.0, 1.0, 1)),
            ("visc_elements", (aaT, G, w)),
            ("div_elements", (F, G, valp, w)),
        ]
        print(f"\n== dimension {d}: {nc} cells x {nq} points, {na} basis fns ==")
        print(f"{'kernel':>14s} {'numpy':>10s} {'compiled':>10s} {'speedup':>8s}")
        for name, a in cases:
            t_py = timeit(getattr(kpy, name), *a, repeat=args.repeat)
            if kc is None:
                print(f"{name:>14s} {t_py * 1e3:9.3f}ms {'n/a':>10s}")
                continue
            t_c = timeit(getattr(kc, name), *a, repeat=args.repeat)
            print(f"{name:>14s} {t_py * 1e3:9.3f}ms {t_c * 1e3:9.3f}ms {t_py / t_c:7.1f}x")


if __name__ == "__main__":
    main()
