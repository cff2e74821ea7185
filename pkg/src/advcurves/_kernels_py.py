"""Pure-numpy implementations of the hot raster kernels.

Used when the compiled extension is unavailable (or forced via
ADVCURVES_KERNELS=python). Arithmetic mirrors the compiled code
expression-for-expression so both backends agree bitwise.
"""

from __future__ import annotations

import numpy as np
from scipy import ndimage

_FOUR_CONNECTED = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=np.uint8)


def stroke_mask(segments: np.ndarray, radius: float, height: int, width: int) -> np.ndarray:
    """Mark every pixel whose center lies within `radius` of any segment.

    segments: (n, 4) float64 rows of (x0, y0, x1, y1) in pixel coordinates,
    where pixel (row, col) has its center at x=col, y=row.
    """
    segments = np.asarray(segments, dtype=np.float64).reshape(-1, 4)
    out = np.zeros((height, width), dtype=np.uint8)
    r2 = radius * radius
    for x0, y0, x1, y1 in segments:
        cmin = max(0, int(np.floor(min(x0, x1) - radius)))
        cmax = min(width - 1, int(np.ceil(max(x0, x1) + radius)))
        rmin = max(0, int(np.floor(min(y0, y1) - radius)))
        rmax = min(height - 1, int(np.ceil(max(y0, y1) + radius)))
        if cmin > cmax or rmin > rmax:
            continue
        xs = np.arange(cmin, cmax + 1, dtype=np.float64)
        ys = np.arange(rmin, rmax + 1, dtype=np.float64)
        px, py = np.meshgrid(xs, ys)
        ux = x1 - x0
        uy = y1 - y0
        len2 = ux * ux + uy * uy
        if len2 > 0.0:
            t = ((px - x0) * ux + (py - y0) * uy) / len2
            t = np.clip(t, 0.0, 1.0)
        else:
            t = np.zeros_like(px)
        dx = px - (x0 + t * ux)
        dy = py - (y0 + t * uy)
        hit = dx * dx + dy * dy <= r2
        out[rmin : rmax + 1, cmin : cmax + 1] |= hit.astype(np.uint8)
    return out


def warp_bilinear(
    src: np.ndarray,
    m00: float,
    m01: float,
    m02: float,
    m10: float,
    m11: float,
    m12: float,
) -> np.ndarray:
    """Inverse-affine warp with bilinear sampling and zero padding.

    For each destination pixel (r, c) the source location is
    (x, y) = (m00*c + m01*r + m02, m10*c + m11*r + m12).
    """
    src = np.asarray(src, dtype=np.float64)
    height, width = src.shape
    cs = np.arange(width, dtype=np.float64)
    rs = np.arange(height, dtype=np.float64)
    cgrid, rgrid = np.meshgrid(cs, rs)
    sx = m00 * cgrid + m01 * rgrid + m02
    sy = m10 * cgrid + m11 * rgrid + m12

    x0 = np.floor(sx)
    y0 = np.floor(sy)
    fx = sx - x0
    fy = sy - y0
    x0i = x0.astype(np.int64)
    y0i = y0.astype(np.int64)

    def fetch(yi: np.ndarray, xi: np.ndarray) -> np.ndarray:
        inside = (yi >= 0) & (yi < height) & (xi >= 0) & (xi < width)
        vals = np.zeros(yi.shape, dtype=np.float64)
        vals[inside] = src[yi[inside], xi[inside]]
        return vals

    v00 = fetch(y0i, x0i)
    v01 = fetch(y0i, x0i + 1)
    v10 = fetch(y0i + 1, x0i)
    v11 = fetch(y0i + 1, x0i + 1)
    return (v00 * (1.0 - fx) + v01 * fx) * (1.0 - fy) + (
        v10 * (1.0 - fx) + v11 * fx
    ) * fy


def label_components(mask: np.ndarray) -> tuple[np.ndarray, int]:
    """4-connected component labeling; labels are 1..n, 0 is background."""
    labels, n = ndimage.label(np.asarray(mask, dtype=np.uint8), structure=_FOUR_CONNECTED)
    return labels.astype(np.int32), int(n)
