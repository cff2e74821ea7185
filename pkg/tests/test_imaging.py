"""Masks, fusion, inpainting, PNG roundtrips, and manifest ingestion."""

import numpy as np
import pytest

from advcurves.geometry import PixelSet
from advcurves.imaging import (
    BoundingBox,
    GrayImage,
    Mask,
    fuse,
    inpaint,
    load_image,
    load_manifest,
    load_mask_image,
    make_mask,
    parse_manifest_line,
    save_image,
    save_manifest,
    save_mask_image,
    ManifestEntry,
    LabeledBox,
)


def random_image(rng, w=24, h=18):
    return GrayImage(rng.uniform(0, 1, size=(h, w)))


class TestTypes:
    def test_gray_image_range_check(self):
        with pytest.raises(ValueError):
            GrayImage(np.full((4, 4), 1.5))
        with pytest.raises(ValueError):
            GrayImage(np.full((4, 4), -0.1))

    def test_box_validation(self):
        with pytest.raises(ValueError):
            BoundingBox(0, 0, 0, 5)
        with pytest.raises(ValueError):
            BoundingBox(0, 0, 5, -1)


class TestMakeMask:
    def test_full_canvas(self):
        mask = make_mask(BoundingBox(0, 0, 8, 6), (8, 6))
        assert mask.bits.all()

    def test_interior_box_bit_count(self):
        mask = make_mask(BoundingBox(10, 20, 30, 40), (100, 100))
        assert mask.count() == 1200

    def test_non_intersecting_box(self):
        with pytest.raises(ValueError):
            make_mask(BoundingBox(50, 50, 5, 5), (20, 20))

    def test_partially_off_canvas_clipped(self):
        mask = make_mask(BoundingBox(-2, -2, 6, 6), (20, 20))
        assert mask.count() == 16


class TestFuse:
    def setup_method(self):
        self.rng = np.random.default_rng(1)

    def test_empty_raster_is_identity(self):
        img = random_image(self.rng)
        out = fuse(img, PixelSet.empty(img.width, img.height), "black",
                   make_mask(BoundingBox(0, 0, img.width, img.height), (img.width, img.height)))
        assert out == img

    def test_raster_outside_mask_is_identity(self):
        img = random_image(self.rng)
        mask = make_mask(BoundingBox(0, 0, 4, 4), (img.width, img.height))
        raster = PixelSet([(10, 10), (12, 15)], img.width, img.height)
        assert fuse(img, raster, "black", mask) == img

    def test_single_pixel_black(self):
        img = random_image(self.rng)
        mask = make_mask(BoundingBox(0, 0, img.width, img.height), (img.width, img.height))
        out = fuse(img, PixelSet([(10, 10)], img.width, img.height), "black", mask)
        diff = out.pixels != img.pixels
        assert out.pixels[10, 10] == 0.0
        assert diff.sum() <= 1  # zero when the source pixel was already 0.0

    def test_white_polarity(self):
        img = GrayImage(np.zeros((6, 6)))
        mask = make_mask(BoundingBox(0, 0, 6, 6), (6, 6))
        out = fuse(img, PixelSet([(2, 3)], 6, 6), "white", mask)
        assert out.pixels[2, 3] == 1.0

    def test_dimension_mismatch(self):
        img = random_image(self.rng)
        mask = Mask(np.ones((3, 3), dtype=bool))
        with pytest.raises(ValueError):
            fuse(img, PixelSet([(0, 0)], img.width, img.height), "black", mask)

    def test_input_untouched_and_idempotent(self):
        img = random_image(self.rng)
        before = img.pixels.copy()
        mask = make_mask(BoundingBox(2, 2, 10, 10), (img.width, img.height))
        raster = PixelSet([(3, 3), (5, 8), (15, 20)], img.width, img.height)
        once = fuse(img, raster, "black", mask)
        assert np.array_equal(img.pixels, before)
        twice = fuse(once, raster, "black", mask)
        assert twice == once

    def test_mask_confinement_randomized(self):
        for _ in range(50):
            img = random_image(self.rng)
            x, y = self.rng.integers(0, 10, size=2)
            w, h = self.rng.integers(3, 10, size=2)
            mask = make_mask(BoundingBox(int(x), int(y), int(w), int(h)),
                             (img.width, img.height))
            n = int(self.rng.integers(1, 60))
            coords = np.stack(
                [self.rng.integers(0, img.height, n), self.rng.integers(0, img.width, n)],
                axis=1,
            )
            raster = PixelSet(coords, img.width, img.height)
            out = fuse(img, raster, "black", mask)
            changed = out.pixels != img.pixels
            allowed = raster.to_mask() & mask.bits
            assert not (changed & ~allowed).any()


class TestInpaint:
    def test_defense_fill_constant(self):
        rng = np.random.default_rng(2)
        img = random_image(rng)
        raster = PixelSet([(1, 1), (4, 7), (9, 9)], img.width, img.height)
        fill = 178 / 255
        out = inpaint(img, raster, fill)
        for r, c in raster.coords():
            assert out.pixels[r, c] == fill

    def test_empty_raster(self):
        rng = np.random.default_rng(3)
        img = random_image(rng)
        assert inpaint(img, PixelSet.empty(img.width, img.height), 0.5) == img

    def test_full_canvas(self):
        img = GrayImage(np.zeros((5, 4)))
        full = PixelSet.from_mask(np.ones((5, 4), dtype=bool))
        out = inpaint(img, full, 0.25)
        assert (out.pixels == 0.25).all()

    def test_fill_out_of_range(self):
        img = GrayImage(np.zeros((4, 4)))
        with pytest.raises(ValueError):
            inpaint(img, PixelSet.empty(4, 4), 1.5)

    def test_inpaint_after_fuse_restores_perturbed_set(self):
        rng = np.random.default_rng(4)
        img = random_image(rng)
        mask = make_mask(BoundingBox(2, 2, 12, 10), (img.width, img.height))
        coords = np.stack(
            [rng.integers(0, img.height, 40), rng.integers(0, img.width, 40)], axis=1
        )
        raster = PixelSet(coords, img.width, img.height)
        fused = fuse(img, raster, "black", mask)
        inside = mask.bits[raster.rows, raster.cols]
        perturbed = PixelSet(
            np.stack([raster.rows[inside], raster.cols[inside]], axis=1),
            img.width,
            img.height,
        )
        healed = inpaint(fused, perturbed, 0.7)
        diff_mask = healed.pixels != img.pixels
        assert not (diff_mask & ~perturbed.to_mask()).any()
        for r, c in perturbed.coords():
            assert healed.pixels[r, c] == 0.7


class TestImageIO:
    def test_roundtrip_quantization(self, tmp_path):
        rng = np.random.default_rng(5)
        img = random_image(rng)
        path = tmp_path / "x.png"
        save_image(img, path)
        back = load_image(path)
        assert np.abs(back.pixels - img.pixels).max() <= 1 / 255

    def test_missing_path_names_path(self, tmp_path):
        missing = tmp_path / "nope.png"
        with pytest.raises(OSError) as err:
            load_image(missing)
        assert "nope.png" in str(err.value)

    def test_single_gray_byte(self, tmp_path):
        from PIL import Image

        path = tmp_path / "one.png"
        Image.fromarray(np.array([[128]], dtype=np.uint8), mode="L").save(path)
        img = load_image(path)
        assert img.pixels[0, 0] == 128 / 255

    def test_mask_image_roundtrip(self, tmp_path):
        raster = PixelSet([(0, 1), (3, 2)], 4, 4)
        path = tmp_path / "m.png"
        save_mask_image(raster, path)
        assert load_mask_image(path).coords() == raster.coords()


class TestManifest:
    def test_parse_line(self):
        entry = parse_manifest_line(
            '{"image": "a.png", "boxes": [{"x":1,"y":2,"w":3,"h":4,"class":"person"}]}'
        )
        assert entry.image == "a.png"
        assert entry.boxes[0].box == BoundingBox(1, 2, 3, 4)

    def test_bad_lines_reported_not_dropped(self, tmp_path):
        path = tmp_path / "m.ndjson"
        path.write_text(
            '{"image": "a.png", "boxes": [{"x":1,"y":2,"w":3,"h":4}]}\n'
            "not json at all\n"
            '{"image": "b.png", "boxes": [{"x":1,"y":2,"w":0,"h":4}]}\n',
            encoding="utf-8",
        )
        entries, skipped = load_manifest(path)
        assert len(entries) == 1
        assert [line for line, _ in skipped] == [2, 3]

    def test_height_filter(self, tmp_path):
        path = tmp_path / "m.ndjson"
        entries = [
            ManifestEntry(
                "a.png",
                (
                    LabeledBox(BoundingBox(0, 0, 10, 121)),
                    LabeledBox(BoundingBox(0, 0, 10, 120)),
                ),
            )
        ]
        save_manifest(entries, path)
        loaded, _ = load_manifest(path, min_box_height=120)
        assert len(loaded[0].boxes) == 1
        assert loaded[0].boxes[0].box.h == 121
        unfiltered, _ = load_manifest(path)
        assert len(unfiltered[0].boxes) == 2
