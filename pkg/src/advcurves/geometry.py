"""Parametric perturbation shapes and their rasterization.

Quadratic Bezier curves are the primary perturbation; five alternative
families (lines, triangle, circle, polylines, arcs) exist for shape
ablation. All shapes rasterize to pixel sets via adaptive flattening into
segments followed by stroked scan conversion.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import kernels

# Flattening keeps every polyline chord within this distance of the curve.
FLATNESS_TOL = 0.25

# Stroking marks pixel centers within this radius of the flattened polyline.
# The floor (just above sqrt(2)/2) guarantees the polyline always touches at
# least one pixel center, so thin strokes stay connected.
MIN_STROKE_RADIUS = 0.71

POLARITIES = ("black", "white")

SHAPE_PARAM_COUNTS = {
    "lines": 8,       # two segments: (x0,y0,x1,y1) each
    "triangle": 6,    # three vertices, closed outline
    "circle": 3,      # center + radius, outline
    "polylines": 12,  # two chains of three points
    "arcs": 8,        # two half-circle arcs: (cx,cy,r,theta) each
}

SHAPE_VARIANTS = ("bezier",) + tuple(SHAPE_PARAM_COUNTS)


class Point(NamedTuple):
    x: float
    y: float


@dataclass(frozen=True)
class QuadBezier:
    """Quadratic curve through control points p0, p1, p2."""

    p0: Point
    p1: Point
    p2: Point

    def __post_init__(self) -> None:
        for p in (self.p0, self.p1, self.p2):
            if not (math.isfinite(p.x) and math.isfinite(p.y)):
                raise ValueError(f"non-finite control point: {p}")


@dataclass(frozen=True)
class CurveSet:
    """A perturbation: one or more curves plus polarity and stroke width."""

    curves: tuple[QuadBezier, ...]
    polarity: str = "black"
    stroke_width: float = 1.0

    def __post_init__(self) -> None:
        if len(self.curves) < 1:
            raise ValueError("curve set needs at least one curve")
        if self.polarity not in POLARITIES:
            raise ValueError(f"polarity must be one of {POLARITIES}")
        if self.stroke_width < 1.0:
            raise ValueError("stroke width must be >= 1 pixel")

    @property
    def k(self) -> int:
        return len(self.curves)


@dataclass(frozen=True)
class ShapeFamily:
    """An ablation shape: variant name plus its bounded parameter vector."""

    variant: str
    params: tuple[float, ...]
    stroke_width: float = 1.0

    def __post_init__(self) -> None:
        if self.variant not in SHAPE_VARIANTS:
            raise ValueError(f"unknown shape variant: {self.variant!r}")
        n = len(self.params)
        if self.variant == "bezier":
            if n < 6 or n % 6 != 0:
                raise ValueError(f"bezier variant needs 6k params, got {n}")
        elif n != SHAPE_PARAM_COUNTS[self.variant]:
            raise ValueError(
                f"{self.variant} needs {SHAPE_PARAM_COUNTS[self.variant]} params, got {n}"
            )
        if self.stroke_width < 1.0:
            raise ValueError("stroke width must be >= 1 pixel")


class PixelSet:
    """Deduplicated integer (row, col) pixels inside a fixed canvas."""

    __slots__ = ("width", "height", "rows", "cols")

    def __init__(self, coords: np.ndarray | list, width: int, height: int):
        if width < 1 or height < 1:
            raise ValueError("canvas dimensions must be >= 1")
        arr = np.asarray(coords, dtype=np.int64).reshape(-1, 2)
        if arr.size:
            rows, cols = arr[:, 0], arr[:, 1]
            if (rows < 0).any() or (rows >= height).any() or (cols < 0).any() or (
                cols >= width
            ).any():
                raise ValueError("pixel outside canvas")
            flat = np.unique(rows * width + cols)
            rows, cols = flat // width, flat % width
        else:
            rows = np.empty(0, dtype=np.int64)
            cols = np.empty(0, dtype=np.int64)
        self.width = int(width)
        self.height = int(height)
        self.rows = rows
        self.cols = cols

    @classmethod
    def from_mask(cls, mask: np.ndarray) -> "PixelSet":
        height, width = mask.shape
        ps = cls.__new__(cls)
        rows, cols = np.nonzero(mask)
        ps.width = int(width)
        ps.height = int(height)
        ps.rows = rows.astype(np.int64)
        ps.cols = cols.astype(np.int64)
        return ps

    @classmethod
    def empty(cls, width: int, height: int) -> "PixelSet":
        return cls(np.empty((0, 2), dtype=np.int64), width, height)

    def to_mask(self) -> np.ndarray:
        mask = np.zeros((self.height, self.width), dtype=bool)
        mask[self.rows, self.cols] = True
        return mask

    def coords(self) -> set[tuple[int, int]]:
        return set(zip(self.rows.tolist(), self.cols.tolist()))

    def union(self, other: "PixelSet") -> "PixelSet":
        if (other.width, other.height) != (self.width, self.height):
            raise ValueError("canvas mismatch")
        coords = np.concatenate(
            [
                np.stack([self.rows, self.cols], axis=1),
                np.stack([other.rows, other.cols], axis=1),
            ]
        )
        return PixelSet(coords, self.width, self.height)

    def __len__(self) -> int:
        return len(self.rows)

    def __contains__(self, pixel: tuple[int, int]) -> bool:
        r, c = pixel
        return bool(((self.rows == r) & (self.cols == c)).any())

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PixelSet):
            return NotImplemented
        return (
            self.width == other.width
            and self.height == other.height
            and np.array_equal(self.rows, other.rows)
            and np.array_equal(self.cols, other.cols)
        )

    def __repr__(self) -> str:
        return f"PixelSet({len(self)} px on {self.width}x{self.height})"


def bezier_eval(curve: QuadBezier, t: float) -> Point:
    """Evaluate the quadratic at t: (1-t)^2 p0 + 2t(1-t) p1 + t^2 p2."""
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"t must be in [0, 1], got {t}")
    u = 1.0 - t
    a, b, c = u * u, 2.0 * t * u, t * t
    return Point(
        a * curve.p0.x + b * curve.p1.x + c * curve.p2.x,
        a * curve.p0.y + b * curve.p1.y + c * curve.p2.y,
    )


def bezier_eval_n(control_points: list[Point] | tuple[Point, ...], t: float) -> Point:
    """Evaluate an order-n curve via the Bernstein basis."""
    pts = list(control_points)
    if len(pts) < 2:
        raise ValueError("need at least 2 control points")
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"t must be in [0, 1], got {t}")
    n = len(pts) - 1
    x = y = 0.0
    for m, p in enumerate(pts):
        w = math.comb(n, m) * (1.0 - t) ** (n - m) * t**m
        x += w * p.x
        y += w * p.y
    return Point(x, y)


def flatten_curve(curve: QuadBezier, tol: float = FLATNESS_TOL) -> list[Point]:
    """Polyline vertices on the curve, chords within tol of it."""

    out: list[Point] = [curve.p0]

    def rec(p0: Point, p1: Point, p2: Point, depth: int) -> None:
        # Max curve-to-chord deviation of a quadratic is |p1 - mid(p0,p2)| / 2.
        dev = 0.5 * math.hypot(
            p1.x - 0.5 * (p0.x + p2.x), p1.y - 0.5 * (p0.y + p2.y)
        )
        if dev <= tol or depth >= 24:
            out.append(p2)
            return
        l1 = Point(0.5 * (p0.x + p1.x), 0.5 * (p0.y + p1.y))
        r1 = Point(0.5 * (p1.x + p2.x), 0.5 * (p1.y + p2.y))
        mid = Point(0.5 * (l1.x + r1.x), 0.5 * (l1.y + r1.y))
        rec(p0, l1, mid, depth + 1)
        rec(mid, r1, p2, depth + 1)

    rec(curve.p0, curve.p1, curve.p2, 0)
    return out


def _polyline_segments(points: list[Point]) -> np.ndarray:
    if len(points) < 2:
        p = points[0]
        return np.array([[p.x, p.y, p.x, p.y]], dtype=np.float64)
    arr = np.array(points, dtype=np.float64)
    return np.concatenate([arr[:-1], arr[1:]], axis=1)


def stroke_radius(stroke_width: float) -> float:
    return max(stroke_width / 2.0, MIN_STROKE_RADIUS)


def rasterize_segments(
    segments: np.ndarray, stroke_width: float, canvas: tuple[int, int]
) -> PixelSet:
    """Stroke (x0,y0,x1,y1) segments onto a width x height canvas."""
    width, height = canvas
    if width < 1 or height < 1:
        raise ValueError("canvas dimensions must be >= 1")
    if stroke_width < 1.0:
        raise ValueError("stroke width must be >= 1 pixel")
    mask = kernels.stroke_mask(segments, stroke_radius(stroke_width), height, width)
    return PixelSet.from_mask(mask)


def rasterize_curve(
    curve: QuadBezier, stroke_width: float, canvas: tuple[int, int]
) -> PixelSet:
    """Rasterize one stroked quadratic; off-canvas pixels are dropped."""
    return rasterize_segments(
        _polyline_segments(flatten_curve(curve)), stroke_width, canvas
    )


def rasterize_curveset(curveset: CurveSet, canvas: tuple[int, int]) -> PixelSet:
    """Union raster of every curve in the set, one scan-conversion pass."""
    segs = np.concatenate(
        [_polyline_segments(flatten_curve(c)) for c in curveset.curves]
    )
    return rasterize_segments(segs, curveset.stroke_width, canvas)


def _arc_polyline(cx: float, cy: float, r: float, start: float, sweep: float) -> list[Point]:
    """Points along a circular arc, chords within FLATNESS_TOL of it."""
    if r <= 0.0:
        return [Point(cx, cy)]
    # Chord sagitta r(1 - cos(step/2)) <= tol bounds the step angle.
    max_step = 2.0 * math.acos(max(-1.0, 1.0 - FLATNESS_TOL / r))
    n = max(4, int(math.ceil(abs(sweep) / max_step)))
    return [
        Point(cx + r * math.cos(start + sweep * i / n), cy + r * math.sin(start + sweep * i / n))
        for i in range(n + 1)
    ]


def decode_shape(family: ShapeFamily, canvas: tuple[int, int]) -> PixelSet:
    """Rasterize an ablation shape (or Bezier set) from its parameters."""
    p = family.params
    chains: list[list[Point]]
    if family.variant == "bezier":
        curves = tuple(
            QuadBezier(
                Point(p[i], p[i + 1]), Point(p[i + 2], p[i + 3]), Point(p[i + 4], p[i + 5])
            )
            for i in range(0, len(p), 6)
        )
        chains = [flatten_curve(c) for c in curves]
    elif family.variant == "lines":
        chains = [
            [Point(p[0], p[1]), Point(p[2], p[3])],
            [Point(p[4], p[5]), Point(p[6], p[7])],
        ]
    elif family.variant == "triangle":
        v = [Point(p[0], p[1]), Point(p[2], p[3]), Point(p[4], p[5])]
        chains = [[v[0], v[1], v[2], v[0]]]
    elif family.variant == "circle":
        chains = [_arc_polyline(p[0], p[1], p[2], 0.0, 2.0 * math.pi)]
    elif family.variant == "polylines":
        chains = [
            [Point(p[0], p[1]), Point(p[2], p[3]), Point(p[4], p[5])],
            [Point(p[6], p[7]), Point(p[8], p[9]), Point(p[10], p[11])],
        ]
    elif family.variant == "arcs":
        chains = [
            _arc_polyline(p[0], p[1], p[2], p[3], math.pi),
            _arc_polyline(p[4], p[5], p[6], p[7], math.pi),
        ]
    else:  # pragma: no cover - guarded by ShapeFamily validation
        raise ValueError(family.variant)
    segs = np.concatenate([_polyline_segments(c) for c in chains])
    return rasterize_segments(segs, family.stroke_width, canvas)


def decode_params(
    vector: np.ndarray,
    k: int,
    bounds: tuple[np.ndarray, np.ndarray],
    polarity: str = "black",
    stroke_width: float = 1.0,
) -> CurveSet:
    """Map a 6k search vector to k curves, clamping into bounds first."""
    vec = np.asarray(vector, dtype=np.float64).ravel()
    if vec.shape[0] != 6 * k:
        raise ValueError(f"expected {6 * k} parameters for k={k}, got {vec.shape[0]}")
    lo, hi = bounds
    clamped = np.clip(vec, lo, hi)
    curves = tuple(
        QuadBezier(
            Point(clamped[i], clamped[i + 1]),
            Point(clamped[i + 2], clamped[i + 3]),
            Point(clamped[i + 4], clamped[i + 5]),
        )
        for i in range(0, 6 * k, 6)
    )
    return CurveSet(curves, polarity=polarity, stroke_width=stroke_width)


def encode_params(curveset: CurveSet) -> np.ndarray:
    """Inverse of decode_params' layout: (x0,y0,x1,y1,x2,y2) per curve."""
    out = np.empty(6 * curveset.k, dtype=np.float64)
    for i, c in enumerate(curveset.curves):
        out[6 * i : 6 * i + 6] = (c.p0.x, c.p0.y, c.p1.x, c.p1.y, c.p2.x, c.p2.y)
    return out


def curve_search_bounds(box_x: int, box_y: int, box_w: int, box_h: int, k: int
                        ) -> tuple[np.ndarray, np.ndarray]:
    """Per-dimension bounds confining 6k curve coordinates to a box."""
    lo = np.empty(6 * k)
    hi = np.empty(6 * k)
    lo[0::2] = box_x
    hi[0::2] = box_x + box_w - 1
    lo[1::2] = box_y
    hi[1::2] = box_y + box_h - 1
    return lo, hi


def shape_search_bounds(variant: str, box_x: int, box_y: int, box_w: int, box_h: int,
                        k: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """Per-dimension bounds for an ablation family inside a box."""
    if variant == "bezier":
        return curve_search_bounds(box_x, box_y, box_w, box_h, k)
    if variant not in SHAPE_PARAM_COUNTS:
        raise ValueError(f"unknown shape variant: {variant!r}")
    x_lo, x_hi = float(box_x), float(box_x + box_w - 1)
    y_lo, y_hi = float(box_y), float(box_y + box_h - 1)
    r_hi = max(2.0, min(box_w, box_h) / 2.0)
    if variant in ("lines", "triangle", "polylines"):
        n = SHAPE_PARAM_COUNTS[variant]
        lo = np.empty(n)
        hi = np.empty(n)
        lo[0::2], hi[0::2] = x_lo, x_hi
        lo[1::2], hi[1::2] = y_lo, y_hi
        return lo, hi
    if variant == "circle":
        return (np.array([x_lo, y_lo, 1.0]), np.array([x_hi, y_hi, r_hi]))
    # arcs: (cx, cy, r, theta) per arc
    lo = np.array([x_lo, y_lo, 1.0, 0.0] * 2)
    hi = np.array([x_hi, y_hi, r_hi, 2.0 * math.pi] * 2)
    return lo, hi
