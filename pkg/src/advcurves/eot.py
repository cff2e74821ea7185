"""Random image transforms and expectation-based robust fitness.

Transform order is fixed (geometric warp, then brightness, then
downsample/upsample) so that runs are reproducible. The geometric part
uses bilinear sampling with zero padding; the resolution step uses
nearest-neighbor both ways.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .imaging import BoundingBox, GrayImage
from .oracle import DetectorOracle, target_confidence


@dataclass(frozen=True)
class TransformConfig:
    """Sampling ranges for the transform distribution.

    Defaults model mild capture error for digital campaigns (single
    sample). For physical-patch preparation raise samples_m (8 works well)
    so fitness averages over the distribution.
    """

    rotation_range: float = 5.0       # degrees, +/-
    translate_range: float = 0.02     # fraction of canvas, +/-
    scale_range: tuple[float, float] = (0.95, 1.05)
    brightness_range: float = 0.05    # intensity offset, +/-
    downsample_max: int = 2
    samples_m: int = 1

    def __post_init__(self) -> None:
        if self.rotation_range < 0 or self.translate_range < 0 or self.brightness_range < 0:
            raise ValueError("ranges must be non-negative")
        lo, hi = self.scale_range
        if not (0.0 < lo <= hi):
            raise ValueError("scale range must satisfy 0 < lo <= hi")
        if self.downsample_max < 1:
            raise ValueError("downsample_max must be >= 1")
        if self.samples_m < 1:
            raise ValueError("samples_m must be >= 1")

    @classmethod
    def identity(cls, samples_m: int = 1) -> "TransformConfig":
        return cls(0.0, 0.0, (1.0, 1.0), 0.0, 1, samples_m)

    @classmethod
    def physical_prep(cls) -> "TransformConfig":
        """Averaged fitness over 8 samples, for patch-deployment runs."""
        return cls(samples_m=8)


@dataclass(frozen=True)
class Transform:
    rotation: float           # degrees
    translate: tuple[float, float]  # pixels (dx, dy)
    scale: float
    brightness: float
    downsample: int

    @property
    def is_geometric_identity(self) -> bool:
        return self.rotation == 0.0 and self.scale == 1.0 and self.translate == (0.0, 0.0)


IDENTITY_TRANSFORM = Transform(0.0, (0.0, 0.0), 1.0, 0.0, 1)


def sample_transform(
    config: TransformConfig, canvas: tuple[int, int], rng: np.random.Generator
) -> Transform:
    """Draw one transform uniformly from the config's ranges."""
    width, height = canvas
    rotation = rng.uniform(-config.rotation_range, config.rotation_range)
    dx = rng.uniform(-config.translate_range, config.translate_range) * width
    dy = rng.uniform(-config.translate_range, config.translate_range) * height
    lo, hi = config.scale_range
    scale = rng.uniform(lo, hi)
    brightness = rng.uniform(-config.brightness_range, config.brightness_range)
    downsample = int(rng.integers(1, config.downsample_max + 1))
    return Transform(rotation, (dx, dy), scale, brightness, downsample)


def apply_transform(image: GrayImage, t: Transform) -> GrayImage:
    """Warp, brighten, and resample; output dims equal input dims.

    The identity transform is short-circuited so it is exactly the
    identity map on pixels.
    """
    out = image.pixels
    if not t.is_geometric_identity:
        # Destination pixel (c, r) samples the source at the inverse of
        # p' = s*R(theta)*(p - center) + center + translate.
        height, width = out.shape
        cx = (width - 1) / 2.0
        cy = (height - 1) / 2.0
        theta = math.radians(t.rotation)
        cos_t = math.cos(theta)
        sin_t = math.sin(theta)
        inv_s = 1.0 / t.scale
        m00 = inv_s * cos_t
        m01 = inv_s * sin_t
        m10 = -inv_s * sin_t
        m11 = inv_s * cos_t
        dx, dy = t.translate
        m02 = cx - m00 * (cx + dx) - m01 * (cy + dy)
        m12 = cy - m10 * (cx + dx) - m11 * (cy + dy)
        out = kernels.warp_bilinear(out, m00, m01, m02, m10, m11, m12)
    if t.brightness != 0.0:
        out = np.clip(out + t.brightness, 0.0, 1.0)
    if t.downsample > 1:
        f = t.downsample
        small = out[::f, ::f]
        out = np.repeat(np.repeat(small, f, axis=0), f, axis=1)
        out = out[: image.height, : image.width]
    if out is image.pixels:
        return image.copy()
    return GrayImage(np.clip(out, 0.0, 1.0), copy=False)


def expected_confidence(
    oracle: DetectorOracle,
    image: GrayImage,
    target: BoundingBox,
    config: TransformConfig,
    rng: np.random.Generator,
    iou_threshold: float = 0.45,
    target_class: str = "person",
) -> float:
    """Mean target confidence over samples_m transformed copies.

    Consumes exactly samples_m oracle queries; oracle failures propagate.
    """
    total = 0.0
    for _ in range(config.samples_m):
        t = sample_transform(config, (image.width, image.height), rng)
        detections = oracle.detect(apply_transform(image, t))
        total += target_confidence(detections, target, iou_threshold, target_class)
    return total / config.samples_m
