"""Grayscale images, box masks, the overwrite compositor, and dataset I/O.

Perturbation pixels fully occlude the underlying scene (a cold patch blocks
body heat), so fusion is a hard overwrite to 0.0 or 1.0 rather than a blend.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .geometry import PixelSet


@dataclass(frozen=True)
class BoundingBox:
    """Top-left corner plus width/height, in pixels."""

    x: int
    y: int
    w: int
    h: int

    def __post_init__(self) -> None:
        if self.w <= 0 or self.h <= 0:
            raise ValueError(f"box must have positive size, got {self.w}x{self.h}")

    @property
    def area(self) -> int:
        return self.w * self.h

    def intersects_canvas(self, width: int, height: int) -> bool:
        return self.x < width and self.y < height and self.x + self.w > 0 and self.y + self.h > 0

    def as_list(self) -> list[int]:
        return [self.x, self.y, self.w, self.h]


class GrayImage:
    """Single-channel raster with intensities in [0, 1], row-major float64."""

    __slots__ = ("pixels",)

    def __init__(self, pixels: np.ndarray, copy: bool = True):
        arr = np.array(pixels, dtype=np.float64, copy=copy)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError("image must be a 2-D array with positive dimensions")
        if np.isnan(arr).any() or arr.min() < 0.0 or arr.max() > 1.0:
            raise ValueError("intensities must lie in [0, 1]")
        self.pixels = arr

    @classmethod
    def full(cls, width: int, height: int, value: float) -> "GrayImage":
        return cls(np.full((height, width), value), copy=False)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    def copy(self) -> "GrayImage":
        return GrayImage(self.pixels, copy=True)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, GrayImage):
            return NotImplemented
        return np.array_equal(self.pixels, other.pixels)

    def __repr__(self) -> str:
        return f"GrayImage({self.width}x{self.height})"


class Mask:
    """Binary grid restricting where perturbation pixels may land."""

    __slots__ = ("bits",)

    def __init__(self, bits: np.ndarray):
        self.bits = np.asarray(bits, dtype=bool)
        if self.bits.ndim != 2:
            raise ValueError("mask must be 2-D")

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    def count(self) -> int:
        return int(self.bits.sum())


def make_mask(box: BoundingBox, canvas: tuple[int, int]) -> Mask:
    """Mask set exactly on box intersected with the canvas."""
    width, height = canvas
    if not box.intersects_canvas(width, height):
        raise ValueError(f"box {box} does not intersect {width}x{height} canvas")
    bits = np.zeros((height, width), dtype=bool)
    bits[max(0, box.y) : min(height, box.y + box.h), max(0, box.x) : min(width, box.x + box.w)] = True
    return Mask(bits)


def fuse(image: GrayImage, raster: PixelSet, polarity: str, mask: Mask) -> GrayImage:
    """Overwrite raster-inside-mask pixels with 0.0 (black) or 1.0 (white)."""
    if polarity == "black":
        value = 0.0
    elif polarity == "white":
        value = 1.0
    else:
        raise ValueError(f"polarity must be 'black' or 'white', got {polarity!r}")
    if (raster.width, raster.height) != (image.width, image.height) or (
        mask.width,
        mask.height,
    ) != (image.width, image.height):
        raise ValueError("image, raster canvas, and mask dimensions must match")
    out = image.pixels.copy()
    keep = mask.bits[raster.rows, raster.cols]
    out[raster.rows[keep], raster.cols[keep]] = value
    return GrayImage(out, copy=False)


def inpaint(image: GrayImage, raster: PixelSet, fill: float) -> GrayImage:
    """Overwrite every raster pixel with a constant fill intensity."""
    if not 0.0 <= fill <= 1.0:
        raise ValueError(f"fill must be in [0, 1], got {fill}")
    if (raster.width, raster.height) != (image.width, image.height):
        raise ValueError("image and raster canvas dimensions must match")
    out = image.pixels.copy()
    out[raster.rows, raster.cols] = fill
    return GrayImage(out, copy=False)


def load_image(path: str | Path) -> GrayImage:
    """Read an image file as 8-bit grayscale, intensity = byte / 255."""
    try:
        with Image.open(path) as im:
            gray = im.convert("L")
            data = np.asarray(gray, dtype=np.float64) / 255.0
    except FileNotFoundError:
        raise
    except Exception as exc:
        raise OSError(f"cannot read image {path}: {exc}") from exc
    return GrayImage(data, copy=False)


def save_image(image: GrayImage, path: str | Path) -> None:
    """Write an 8-bit grayscale PNG; save then load roundtrips to 1/255."""
    data = np.rint(image.pixels * 255.0).astype(np.uint8)
    Image.fromarray(data, mode="L").save(path, format="PNG")


def save_mask_image(raster: PixelSet, path: str | Path) -> None:
    """Persist a pixel set as a binary PNG (255 = perturbed)."""
    save_image(GrayImage(raster.to_mask().astype(np.float64), copy=False), path)


def load_mask_image(path: str | Path) -> PixelSet:
    img = load_image(path)
    return PixelSet.from_mask(img.pixels >= 0.5)


@dataclass(frozen=True)
class LabeledBox:
    box: BoundingBox
    class_label: str = "person"


@dataclass(frozen=True)
class ManifestEntry:
    image: str
    boxes: tuple[LabeledBox, ...]


def parse_manifest_line(line: str) -> ManifestEntry:
    rec = json.loads(line)
    boxes = tuple(
        LabeledBox(
            BoundingBox(int(b["x"]), int(b["y"]), int(b["w"]), int(b["h"])),
            str(b.get("class", "person")),
        )
        for b in rec["boxes"]
    )
    return ManifestEntry(image=str(rec["image"]), boxes=boxes)


def load_manifest(
    path: str | Path, min_box_height: int | None = None
) -> tuple[list[ManifestEntry], list[tuple[int, str]]]:
    """Read a newline-delimited JSON manifest.

    Returns (entries, skipped) where skipped holds (line_number, reason)
    for records that could not be parsed; they are reported, never silently
    dropped. With min_box_height set, boxes of height <= the threshold are
    filtered out (120 reproduces the tall-pedestrian ingestion filter).
    """
    entries: list[ManifestEntry] = []
    skipped: list[tuple[int, str]] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                entry = parse_manifest_line(line)
            except (ValueError, KeyError, TypeError) as exc:
                skipped.append((lineno, f"{type(exc).__name__}: {exc}"))
                continue
            if min_box_height is not None:
                entry = ManifestEntry(
                    entry.image,
                    tuple(b for b in entry.boxes if b.box.h > min_box_height),
                )
            entries.append(entry)
    return entries, skipped


def save_manifest(entries: list[ManifestEntry], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for e in entries:
            rec = {
                "image": e.image,
                "boxes": [
                    {
                        "x": b.box.x,
                        "y": b.box.y,
                        "w": b.box.w,
                        "h": b.box.h,
                        "class": b.class_label,
                    }
                    for b in e.boxes
                ],
            }
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
