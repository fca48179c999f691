"""Benchmark the tomography operator assembly: numba kernel vs the pure
numpy/python fallback.

Run with ``python benchmarks/bench_tomo.py [n]``.  The numba path can be
disabled package-wide via LRK_NO_NUMBA=1, in which case only the
fallback is timed.
"""

import sys
import time

import numpy as np

from lrkrylov import _tomo_kernels


def time_build(n, angles, offsets, use_numba, repeats=3):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        rows, cols, vals = _tomo_kernels.trace_rays(
            n, angles, offsets, use_numba=use_numba)
        best = min(best, time.perf_counter() - t0)
    return best, vals.size


def main():
    n = int(sys.argv[1]) if len(sys.argv) > 1 else 128
    angles = np.deg2rad(np.linspace(0.0, 179.0, 180))
    spacing = n / n
    offsets = (np.arange(n) - (n - 1) / 2.0) * spacing

    t_py, nnz = time_build(n, angles, offsets, use_numba=False, repeats=1)
    print(f"n={n}, rays={angles.size * n}, nonzeros={nnz}")
    print(f"python fallback: {t_py * 1e3:9.1f} ms")
    if _tomo_kernels.USE_NUMBA:
        # warm up compilation before timing
        _tomo_kernels.trace_rays(8, angles[:2], offsets[:2], use_numba=True)
        t_nb, nnz_nb = time_build(n, angles, offsets, use_numba=True)
        assert nnz_nb == nnz
        print(f"numba kernel:    {t_nb * 1e3:9.1f} ms  "
              f"(speedup {t_py / t_nb:.1f}x)")
    else:
        print("numba disabled (LRK_NO_NUMBA set or numba unavailable)")


if __name__ == "__main__":
    main()
