"""Compare the compiled kernels against the pure-numpy fallback.

Run: python benchmarks/bench_kernels.py
"""

import time

import numpy as np

from advcurves import _kernels_py

try:
    from advcurves import _kernels
except ImportError:
    _kernels = None


def timeit(fn, *args, repeats=200):
    fn(*args)  # warm up
    start = time.perf_counter()
    for _ in range(repeats):
        fn(*args)
    return (time.perf_counter() - start) / repeats * 1e6  # microseconds


def main():
    rng = np.random.default_rng(0)

    # Typical attack workload: two flattened curves (~40 segments) stroked
    # onto a 160x120 canvas.
    segs = rng.uniform(20, 100, size=(40, 4))
    image = rng.uniform(0, 1, size=(120, 160))
    warm = (image > 0.6).astype(np.uint8)
    coeffs = (0.996, 0.087, -4.1, -0.087, 0.996, 6.2)

    cases = [
        ("stroke_mask 40 segs @160x120", "stroke_mask", (segs, 3.0, 120, 160)),
        ("warp_bilinear @160x120", "warp_bilinear", (image, *coeffs)),
        ("label_components @160x120", "label_components", (warm,)),
    ]

    print(f"{'kernel':<32} {'python us':>12} {'compiled us':>12} {'speedup':>9}")
    for label, fn_name, args in cases:
        py_us = timeit(getattr(_kernels_py, fn_name), *args)
        if _kernels is None:
            print(f"{label:<32} {py_us:>12.1f} {'(not built)':>12} {'-':>9}")
            continue
        cy_us = timeit(getattr(_kernels, fn_name), *args)
        print(f"{label:<32} {py_us:>12.1f} {cy_us:>12.1f} {py_us / cy_us:>8.1f}x")


if __name__ == "__main__":
    main()
