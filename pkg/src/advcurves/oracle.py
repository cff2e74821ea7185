"""Black-box detector oracles and target-confidence extraction.

Every oracle exposes detect(image) -> detections, an exact query ledger,
and a concurrent_safe declaration. The synthetic warm-blob detector gives
a deterministic desk-scale stand-in for trained models; real detectors
attach through the wire protocol client in `remote`.
"""

from __future__ import annotations

import threading
from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np

from . import kernels
from .imaging import BoundingBox, GrayImage


@dataclass(frozen=True)
class Detection:
    box: BoundingBox
    objectness: float
    class_label: str

    def __post_init__(self) -> None:
        if not 0.0 <= self.objectness <= 1.0:
            raise ValueError(f"objectness must be in [0, 1], got {self.objectness}")


class QueryLedger:
    """Counts detector invocations exactly; never decreases."""

    def __init__(self) -> None:
        self._count = 0
        self._lock = threading.Lock()

    @property
    def count(self) -> int:
        return self._count

    def increment(self, n: int = 1) -> None:
        with self._lock:
            self._count += n

    def reset(self) -> None:
        with self._lock:
            self._count = 0


class DetectorOracle(ABC):
    """Interface every detector oracle satisfies."""

    concurrent_safe: bool = False

    def __init__(self, ledger: QueryLedger | None = None):
        self.ledger = ledger if ledger is not None else QueryLedger()

    @abstractmethod
    def detect(self, image: GrayImage) -> list[Detection]:
        """Run one detector query, incrementing the ledger by exactly 1."""


@dataclass(frozen=True)
class SynthDetectorConfig:
    warm_threshold: float = 0.6
    min_blob_area: int = 64
    reference_fill: float = 0.9

    def __post_init__(self) -> None:
        if not 0.0 < self.warm_threshold < 1.0:
            raise ValueError("warm_threshold must be in (0, 1)")
        if self.min_blob_area < 1:
            raise ValueError("min_blob_area must be >= 1")
        if not 0.0 < self.reference_fill <= 1.0:
            raise ValueError("reference_fill must be in (0, 1]")


def synthetic_detect(image: GrayImage, config: SynthDetectorConfig) -> list[Detection]:
    """Warm-blob detector: threshold, 4-connected components, bbox scoring.

    objectness = clamp(warm_fraction / reference_fill, 0, 1) with
    warm_fraction = warm pixels inside the component's bbox / bbox area.
    """
    warm = (image.pixels >= config.warm_threshold).astype(np.uint8)
    labels, n = kernels.label_components(warm)
    if n == 0:
        return []
    ys, xs = np.nonzero(labels)
    ids = labels[ys, xs] - 1
    areas = np.bincount(ids, minlength=n)
    top = np.full(n, image.height, dtype=np.int64)
    left = np.full(n, image.width, dtype=np.int64)
    bottom = np.full(n, -1, dtype=np.int64)
    right = np.full(n, -1, dtype=np.int64)
    np.minimum.at(top, ids, ys)
    np.minimum.at(left, ids, xs)
    np.maximum.at(bottom, ids, ys)
    np.maximum.at(right, ids, xs)

    # Integral image for O(1) warm counts over arbitrary boxes.
    integral = np.zeros((image.height + 1, image.width + 1), dtype=np.int64)
    integral[1:, 1:] = warm.cumsum(axis=0).cumsum(axis=1)

    detections = []
    for i in range(n):
        if areas[i] < config.min_blob_area:
            continue
        t, l, b, r = int(top[i]), int(left[i]), int(bottom[i]), int(right[i])
        box = BoundingBox(l, t, r - l + 1, b - t + 1)
        warm_inside = int(
            integral[b + 1, r + 1] - integral[t, r + 1] - integral[b + 1, l] + integral[t, l]
        )
        warm_fraction = warm_inside / box.area
        objectness = min(max(warm_fraction / config.reference_fill, 0.0), 1.0)
        detections.append(Detection(box, objectness, "person"))
    detections.sort(key=lambda d: (d.box.y, d.box.x, d.box.h, d.box.w))
    return detections


class SyntheticOracle(DetectorOracle):
    """Deterministic in-process oracle; safe for concurrent detect calls."""

    concurrent_safe = True

    def __init__(self, config: SynthDetectorConfig | None = None,
                 ledger: QueryLedger | None = None):
        super().__init__(ledger)
        self.config = config if config is not None else SynthDetectorConfig()

    def detect(self, image: GrayImage) -> list[Detection]:
        detections = synthetic_detect(image, self.config)
        self.ledger.increment()
        return detections


def iou(a: BoundingBox, b: BoundingBox) -> float:
    """Intersection over union of two boxes."""
    ix = max(a.x, b.x)
    iy = max(a.y, b.y)
    ix2 = min(a.x + a.w, b.x + b.w)
    iy2 = min(a.y + a.h, b.y + b.h)
    iw = max(0, ix2 - ix)
    ih = max(0, iy2 - iy)
    inter = iw * ih
    if inter == 0:
        return 0.0
    return inter / (a.area + b.area - inter)


def target_confidence(
    detections: list[Detection],
    target: BoundingBox,
    iou_threshold: float,
    target_class: str = "person",
) -> float:
    """Highest objectness among detections matching the attacked target.

    A detection qualifies when its IoU with the target reaches the
    threshold and its class is the attacked class; with none qualifying
    the target has disappeared and the confidence is 0.0.
    """
    if not 0.0 < iou_threshold <= 1.0:
        raise ValueError("iou_threshold must be in (0, 1]")
    best = 0.0
    for det in detections:
        if det.class_label != target_class:
            continue
        if iou(det.box, target) >= iou_threshold:
            best = max(best, det.objectness)
    return best
