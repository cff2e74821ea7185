"""Curve evaluation, rasterization fidelity, and parameter codecs."""

import math

import numpy as np
import pytest
from scipy.spatial import cKDTree

from advcurves.geometry import (
    CurveSet,
    PixelSet,
    Point,
    QuadBezier,
    ShapeFamily,
    bezier_eval,
    bezier_eval_n,
    curve_search_bounds,
    decode_params,
    decode_shape,
    encode_params,
    flatten_curve,
    rasterize_curve,
    rasterize_curveset,
    shape_search_bounds,
    stroke_radius,
)


def random_curve(rng, lo=0.0, hi=63.0):
    pts = rng.uniform(lo, hi, size=6)
    return QuadBezier(Point(pts[0], pts[1]), Point(pts[2], pts[3]), Point(pts[4], pts[5]))


class TestBezierEval:
    def test_endpoints(self):
        c = QuadBezier(Point(1.5, -2.0), Point(10.0, 3.0), Point(-4.0, 7.5))
        assert bezier_eval(c, 0.0) == c.p0
        assert bezier_eval(c, 1.0) == c.p2

    def test_midpoint_hand_value(self):
        # 0.25*p0 + 0.5*p1 + 0.25*p2 for p0=(0,0), p1=(2,4), p2=(4,0).
        c = QuadBezier(Point(0, 0), Point(2, 4), Point(4, 0))
        p = bezier_eval(c, 0.5)
        assert p == Point(2.0, 2.0)

    def test_domain_error(self):
        c = QuadBezier(Point(0, 0), Point(1, 1), Point(2, 0))
        with pytest.raises(ValueError):
            bezier_eval(c, -0.01)
        with pytest.raises(ValueError):
            bezier_eval(c, 1.01)

    def test_nonfinite_control_point_rejected(self):
        with pytest.raises(ValueError):
            QuadBezier(Point(0, 0), Point(float("nan"), 1), Point(2, 0))


class TestBezierEvalN:
    def test_two_points_is_lerp(self):
        p = bezier_eval_n([Point(2, 2), Point(4, 6)], 0.5)
        assert p == Point(3.0, 4.0)

    def test_three_points_matches_quadratic(self):
        rng = np.random.default_rng(0)
        for _ in range(1000):
            c = random_curve(rng, -50, 50)
            t = float(rng.uniform())
            a = bezier_eval(c, t)
            b = bezier_eval_n([c.p0, c.p1, c.p2], t)
            assert abs(a.x - b.x) <= 1e-12 and abs(a.y - b.y) <= 1e-12

    def test_constant_curve(self):
        pts = [Point(3, 7)] * 4
        p = bezier_eval_n(pts, 0.3)
        assert math.isclose(p.x, 3.0) and math.isclose(p.y, 7.0)

    def test_too_few_points(self):
        with pytest.raises(ValueError):
            bezier_eval_n([Point(0, 0)], 0.5)


def hausdorff_ok(curve, width, canvas=(64, 64), samples=2000):
    raster = rasterize_curve(curve, width, canvas)
    ts = np.linspace(0.0, 1.0, samples)
    pts = np.array([bezier_eval(curve, t) for t in ts])
    centers = np.stack([raster.cols, raster.rows], axis=1).astype(float)
    assert len(centers) > 0
    bound = width / 2 + 1 + 1e-9
    d_raster_to_curve = cKDTree(pts).query(centers)[0].max()
    d_curve_to_raster = cKDTree(centers).query(pts)[0].max()
    return d_raster_to_curve <= bound and d_curve_to_raster <= bound


class TestRasterize:
    def test_degenerate_point_curve(self):
        c = QuadBezier(Point(10, 10), Point(10, 10), Point(10, 10))
        raster = rasterize_curve(c, 1.0, (20, 20))
        assert len(raster) > 0
        assert (10, 10) in raster

    def test_fully_off_canvas_is_empty(self):
        c = QuadBezier(Point(100, 100), Point(120, 130), Point(140, 100))
        raster = rasterize_curve(c, 3.0, (20, 20))
        assert len(raster) == 0

    def test_horizontal_run_exact(self):
        c = QuadBezier(Point(0, 5), Point(5, 5), Point(10, 5))
        raster = rasterize_curve(c, 1.0, (20, 20))
        assert raster.coords() == {(5, col) for col in range(0, 11)}

    def test_endpoint_interpolation(self):
        rng = np.random.default_rng(5)
        for _ in range(50):
            c = random_curve(rng, 1.0, 62.0)
            raster = rasterize_curve(c, float(rng.integers(1, 5)), (64, 64))
            centers = np.stack([raster.cols, raster.rows], axis=1).astype(float)
            for p in (c.p0, c.p2):
                d = np.hypot(centers[:, 0] - p.x, centers[:, 1] - p.y).min()
                assert d <= 1.0

    def test_two_sided_hausdorff_sample(self):
        rng = np.random.default_rng(9)
        for _ in range(30):
            width = float(rng.integers(1, 6))
            margin = width / 2 + 2
            c = random_curve(rng, margin, 63.0 - margin)
            assert hausdorff_ok(c, width)

    def test_flatten_vertices_lie_on_curve(self):
        c = QuadBezier(Point(0, 0), Point(30, 60), Point(60, 0))
        pts = flatten_curve(c)
        assert pts[0] == c.p0 and pts[-1] == c.p2
        assert len(pts) > 4

    def test_stroke_radius_floor(self):
        assert stroke_radius(1.0) == pytest.approx(0.71)
        assert stroke_radius(6.0) == 3.0


class TestPixelSet:
    def test_dedup_and_canvas_check(self):
        ps = PixelSet([(1, 2), (1, 2), (0, 0)], 4, 4)
        assert len(ps) == 2
        with pytest.raises(ValueError):
            PixelSet([(5, 0)], 4, 4)

    def test_union(self):
        a = PixelSet([(0, 0)], 4, 4)
        b = PixelSet([(1, 1), (0, 0)], 4, 4)
        assert a.union(b).coords() == {(0, 0), (1, 1)}

    def test_mask_roundtrip(self):
        rng = np.random.default_rng(2)
        mask = rng.uniform(size=(9, 7)) > 0.5
        ps = PixelSet.from_mask(mask)
        assert np.array_equal(ps.to_mask(), mask)


class TestDecodeShape:
    def test_circle_zero_radius_is_dot(self):
        fam = ShapeFamily("circle", (8.0, 8.0, 0.0))
        raster = decode_shape(fam, (16, 16))
        assert (8, 8) in raster
        assert all(abs(r - 8) <= 1 and abs(c - 8) <= 1 for r, c in raster.coords())

    def test_triangle_degenerate_is_dot(self):
        fam = ShapeFamily("triangle", (5.0, 5.0, 5.0, 5.0, 5.0, 5.0))
        raster = decode_shape(fam, (16, 16))
        assert (5, 5) in raster
        assert all(abs(r - 5) <= 1 and abs(c - 5) <= 1 for r, c in raster.coords())

    def test_lines_duplicate_segments_dedupe(self):
        one = ShapeFamily("lines", (1.0, 1.0, 10.0, 8.0, 1.0, 1.0, 10.0, 8.0))
        raster = decode_shape(one, (16, 16))
        single = ShapeFamily("lines", (1.0, 1.0, 10.0, 8.0, 1.0, 1.0, 1.0, 1.0))
        # A second zero-length segment at (1,1) adds no new pixels.
        assert decode_shape(single, (16, 16)).coords() == raster.coords()

    def test_param_count_mismatch(self):
        with pytest.raises(ValueError):
            ShapeFamily("circle", (1.0, 2.0))
        with pytest.raises(ValueError):
            ShapeFamily("arcs", (1.0,) * 6)

    def test_bezier_variant_matches_rasterize(self):
        params = (2.0, 3.0, 20.0, 30.0, 40.0, 3.0)
        fam = ShapeFamily("bezier", params, stroke_width=2.0)
        via_family = decode_shape(fam, (48, 48))
        curve = QuadBezier(Point(2, 3), Point(20, 30), Point(40, 3))
        direct = rasterize_curve(curve, 2.0, (48, 48))
        assert via_family.coords() == direct.coords()

    def test_all_variants_render_nonempty(self):
        rng = np.random.default_rng(3)
        lo_hi = {
            "lines": 8, "triangle": 6, "circle": 3, "polylines": 12, "arcs": 8,
        }
        for variant, n in lo_hi.items():
            lo, hi = shape_search_bounds(variant, 4, 4, 24, 24)
            assert len(lo) == n
            params = tuple(rng.uniform(lo, hi))
            raster = decode_shape(ShapeFamily(variant, params), (32, 32))
            assert len(raster) > 0


class TestDecodeParams:
    def bounds(self, k, lo=-100.0, hi=100.0):
        return (np.full(6 * k, lo), np.full(6 * k, hi))

    def test_direct_layout(self):
        cs = decode_params(np.array([1.0, 2, 3, 4, 5, 6]), 1, self.bounds(1))
        (c,) = cs.curves
        assert c.p0 == Point(1, 2) and c.p1 == Point(3, 4) and c.p2 == Point(5, 6)

    def test_clamped_to_hi(self):
        lo, hi = self.bounds(1, 0.0, 10.0)
        cs = decode_params(np.array([99.0, 2, 3, 4, 5, 6]), 1, (lo, hi))
        assert cs.curves[0].p0.x == 10.0

    def test_roundtrip_random_in_bounds(self):
        rng = np.random.default_rng(8)
        bounds = self.bounds(3, 0.0, 50.0)
        for _ in range(50):
            vec = rng.uniform(0.0, 50.0, size=18)
            cs = decode_params(vec, 3, bounds, polarity="white", stroke_width=2.0)
            again = decode_params(encode_params(cs), 3, bounds, "white", 2.0)
            assert again == cs

    def test_idempotent_under_reclamping(self):
        rng = np.random.default_rng(13)
        bounds = self.bounds(2, 5.0, 9.0)
        vec = rng.uniform(-20, 20, size=12)
        once = decode_params(vec, 2, bounds)
        twice = decode_params(encode_params(once), 2, bounds)
        assert twice == once

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            decode_params(np.zeros(7), 1, self.bounds(1))

    def test_curve_search_bounds_span_box(self):
        lo, hi = curve_search_bounds(10, 20, 30, 40, 2)
        assert lo[0] == 10 and hi[0] == 39
        assert lo[1] == 20 and hi[1] == 59
        assert len(lo) == 12


class TestCurveSet:
    def test_validation(self):
        c = QuadBezier(Point(0, 0), Point(1, 1), Point(2, 0))
        with pytest.raises(ValueError):
            CurveSet((), "black", 1.0)
        with pytest.raises(ValueError):
            CurveSet((c,), "gray", 1.0)
        with pytest.raises(ValueError):
            CurveSet((c,), "black", 0.5)

    def test_union_raster(self):
        a = QuadBezier(Point(2, 2), Point(6, 2), Point(10, 2))
        b = QuadBezier(Point(2, 8), Point(6, 8), Point(10, 8))
        cs = CurveSet((a, b), "black", 1.0)
        raster = rasterize_curveset(cs, (16, 16))
        expected = rasterize_curve(a, 1.0, (16, 16)).coords() | rasterize_curve(
            b, 1.0, (16, 16)
        ).coords()
        assert raster.coords() == expected
