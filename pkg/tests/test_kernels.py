"""Backend equivalence and brute-force correctness for the raster kernels."""

import numpy as np
import pytest

from advcurves import _kernels_py
from advcurves import kernels

try:
    from advcurves import _kernels
except ImportError:
    _kernels = None

needs_compiled = pytest.mark.skipif(_kernels is None, reason="extension not built")

BACKENDS = [_kernels_py] + ([_kernels] if _kernels is not None else [])


def brute_stroke(segments, radius, height, width):
    out = np.zeros((height, width), dtype=np.uint8)
    for row in range(height):
        for col in range(width):
            for x0, y0, x1, y1 in segments:
                ux, uy = x1 - x0, y1 - y0
                len2 = ux * ux + uy * uy
                t = 0.0 if len2 == 0 else min(max(((col - x0) * ux + (row - y0) * uy) / len2, 0.0), 1.0)
                dx, dy = col - (x0 + t * ux), row - (y0 + t * uy)
                if dx * dx + dy * dy <= radius * radius:
                    out[row, col] = 1
                    break
    return out


@pytest.mark.parametrize("impl", BACKENDS)
def test_stroke_matches_brute_force(impl):
    rng = np.random.default_rng(11)
    for _ in range(10):
        segs = rng.uniform(-3, 23, size=(3, 4))
        radius = rng.uniform(0.71, 3.0)
        got = impl.stroke_mask(segs, radius, 20, 20)
        assert np.array_equal(got, brute_stroke(segs, radius, 20, 20))


def brute_warp(src, m00, m01, m02, m10, m11, m12):
    h, w = src.shape
    out = np.zeros_like(src)
    for r in range(h):
        for c in range(w):
            sx = m00 * c + m01 * r + m02
            sy = m10 * c + m11 * r + m12
            x0, y0 = int(np.floor(sx)), int(np.floor(sy))
            fx, fy = sx - x0, sy - y0

            def at(yy, xx):
                return src[yy, xx] if 0 <= yy < h and 0 <= xx < w else 0.0

            out[r, c] = (at(y0, x0) * (1 - fx) + at(y0, x0 + 1) * fx) * (1 - fy) + (
                at(y0 + 1, x0) * (1 - fx) + at(y0 + 1, x0 + 1) * fx
            ) * fy
    return out


@pytest.mark.parametrize("impl", BACKENDS)
def test_warp_matches_brute_force(impl):
    rng = np.random.default_rng(7)
    src = rng.uniform(0, 1, size=(14, 11))
    coeffs = (0.97, 0.05, 1.3, -0.04, 1.02, -0.8)
    got = impl.warp_bilinear(src, *coeffs)
    assert np.allclose(got, brute_warp(src, *coeffs), atol=1e-12)


@pytest.mark.parametrize("impl", BACKENDS)
def test_label_counts_and_membership(impl):
    mask = np.array(
        [
            [1, 1, 0, 0, 1],
            [0, 1, 0, 1, 1],
            [0, 0, 0, 0, 0],
            [1, 0, 1, 1, 0],
        ],
        dtype=np.uint8,
    )
    labels, n = impl.label_components(mask)
    assert n == 4
    assert (labels > 0).sum() == mask.sum()
    # Diagonal touch is not 4-connected.
    assert labels[0, 0] == labels[1, 1]
    assert labels[0, 4] == labels[1, 3]
    assert labels[3, 0] != labels[3, 2]


def canonical(labels):
    """Relabel by first raster-scan occurrence so numbering is comparable."""
    out = np.zeros_like(labels)
    mapping = {}
    flat = labels.ravel()
    canon = out.ravel()
    for i, v in enumerate(flat):
        if v == 0:
            continue
        if v not in mapping:
            mapping[v] = len(mapping) + 1
        canon[i] = mapping[v]
    return out


@needs_compiled
def test_backends_agree_bitwise():
    rng = np.random.default_rng(42)
    for _ in range(20):
        segs = rng.uniform(-5, 45, size=(4, 4))
        radius = rng.uniform(0.71, 4.0)
        a = _kernels_py.stroke_mask(segs, radius, 40, 40)
        b = _kernels.stroke_mask(segs, radius, 40, 40)
        assert np.array_equal(a, b)

        img = rng.uniform(0, 1, size=(32, 28))
        coeffs = rng.uniform(-1.1, 1.1, size=6)
        wa = _kernels_py.warp_bilinear(img, *coeffs)
        wb = _kernels.warp_bilinear(img, *coeffs)
        assert np.array_equal(wa, wb)

        mask = (rng.uniform(size=(30, 30)) > 0.55).astype(np.uint8)
        la, na = _kernels_py.label_components(mask)
        lb, nb = _kernels.label_components(mask)
        assert na == nb
        assert np.array_equal(canonical(la), canonical(lb))


def test_default_backend_exports():
    assert kernels.BACKEND in ("compiled", "python")
    assert callable(kernels.stroke_mask)
