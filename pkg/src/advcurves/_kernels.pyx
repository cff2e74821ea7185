# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled raster kernels: segment stroking, affine warp, component labeling.

Arithmetic matches _kernels_py expression-for-expression so the two
backends agree bitwise.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport ceil, floor

cnp.import_array()


def stroke_mask(segments, double radius, int height, int width):
    """Mark every pixel whose center lies within `radius` of any segment."""
    cdef double[:, ::1] segs = np.ascontiguousarray(
        np.asarray(segments, dtype=np.float64).reshape(-1, 4)
    )
    out = np.zeros((height, width), dtype=np.uint8)
    cdef unsigned char[:, ::1] o = out
    cdef double r2 = radius * radius
    cdef Py_ssize_t s, row, col
    cdef int cmin, cmax, rmin, rmax
    cdef double x0, y0, x1, y1, ux, uy, len2, t, px, py, dx, dy, lo, hi

    for s in range(segs.shape[0]):
        x0 = segs[s, 0]
        y0 = segs[s, 1]
        x1 = segs[s, 2]
        y1 = segs[s, 3]
        lo = x0 if x0 < x1 else x1
        hi = x0 if x0 > x1 else x1
        cmin = <int>floor(lo - radius)
        cmax = <int>ceil(hi + radius)
        if cmin < 0:
            cmin = 0
        if cmax > width - 1:
            cmax = width - 1
        lo = y0 if y0 < y1 else y1
        hi = y0 if y0 > y1 else y1
        rmin = <int>floor(lo - radius)
        rmax = <int>ceil(hi + radius)
        if rmin < 0:
            rmin = 0
        if rmax > height - 1:
            rmax = height - 1
        if cmin > cmax or rmin > rmax:
            continue
        ux = x1 - x0
        uy = y1 - y0
        len2 = ux * ux + uy * uy
        for row in range(rmin, rmax + 1):
            py = <double>row
            for col in range(cmin, cmax + 1):
                px = <double>col
                if len2 > 0.0:
                    t = ((px - x0) * ux + (py - y0) * uy) / len2
                    if t < 0.0:
                        t = 0.0
                    elif t > 1.0:
                        t = 1.0
                else:
                    t = 0.0
                dx = px - (x0 + t * ux)
                dy = py - (y0 + t * uy)
                if dx * dx + dy * dy <= r2:
                    o[row, col] = 1
    return out


def warp_bilinear(src, double m00, double m01, double m02,
                  double m10, double m11, double m12):
    """Inverse-affine warp with bilinear sampling and zero padding."""
    cdef double[:, ::1] a = np.ascontiguousarray(np.asarray(src, dtype=np.float64))
    cdef int height = a.shape[0]
    cdef int width = a.shape[1]
    out = np.empty((height, width), dtype=np.float64)
    cdef double[:, ::1] o = out
    cdef Py_ssize_t r, c
    cdef long x0i, y0i
    cdef double sx, sy, fx, fy, v00, v01, v10, v11

    for r in range(height):
        for c in range(width):
            sx = m00 * <double>c + m01 * <double>r + m02
            sy = m10 * <double>c + m11 * <double>r + m12
            x0i = <long>floor(sx)
            y0i = <long>floor(sy)
            fx = sx - floor(sx)
            fy = sy - floor(sy)
            v00 = a[y0i, x0i] if (0 <= y0i < height and 0 <= x0i < width) else 0.0
            v01 = a[y0i, x0i + 1] if (0 <= y0i < height and 0 <= x0i + 1 < width) else 0.0
            v10 = a[y0i + 1, x0i] if (0 <= y0i + 1 < height and 0 <= x0i < width) else 0.0
            v11 = a[y0i + 1, x0i + 1] if (0 <= y0i + 1 < height and 0 <= x0i + 1 < width) else 0.0
            o[r, c] = (v00 * (1.0 - fx) + v01 * fx) * (1.0 - fy) + (
                v10 * (1.0 - fx) + v11 * fx
            ) * fy
    return out


def label_components(mask):
    """4-connected component labeling; labels are 1..n in raster-scan order."""
    cdef unsigned char[:, ::1] m = np.ascontiguousarray(np.asarray(mask, dtype=np.uint8))
    cdef int height = m.shape[0]
    cdef int width = m.shape[1]
    labels = np.zeros((height, width), dtype=np.int32)
    cdef int[:, ::1] lab = labels
    stack = np.empty(height * width, dtype=np.int64)
    cdef long[::1] st = stack
    cdef int n = 0
    cdef Py_ssize_t r, c
    cdef long top, idx
    cdef int rr, cc

    for r in range(height):
        for c in range(width):
            if m[r, c] == 0 or lab[r, c] != 0:
                continue
            n += 1
            top = 0
            st[top] = r * width + c
            lab[r, c] = n
            while top >= 0:
                idx = st[top]
                top -= 1
                rr = <int>(idx // width)
                cc = <int>(idx % width)
                if rr > 0 and m[rr - 1, cc] != 0 and lab[rr - 1, cc] == 0:
                    lab[rr - 1, cc] = n
                    top += 1
                    st[top] = idx - width
                if rr < height - 1 and m[rr + 1, cc] != 0 and lab[rr + 1, cc] == 0:
                    lab[rr + 1, cc] = n
                    top += 1
                    st[top] = idx + width
                if cc > 0 and m[rr, cc - 1] != 0 and lab[rr, cc - 1] == 0:
                    lab[rr, cc - 1] = n
                    top += 1
                    st[top] = idx - 1
                if cc < width - 1 and m[rr, cc + 1] != 0 and lab[rr, cc + 1] == 0:
                    lab[rr, cc + 1] = n
                    top += 1
                    st[top] = idx + 1
    return labels, n
