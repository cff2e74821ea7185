"""Synthetic warm-rectangle scenes for desk-scale evaluation.

Each scene is a dark noisy background with one bright rectangle (a
stand-in pedestrian) that the synthetic warm-blob oracle detects with
confidence ~1.0. The ground-truth box is the rectangle's exact extent.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .imaging import (
    BoundingBox,
    GrayImage,
    LabeledBox,
    ManifestEntry,
    save_image,
    save_manifest,
)

SCENE_WIDTH = 160
SCENE_HEIGHT = 120
BODY_INTENSITY = 0.9


def make_scene(
    rng: np.random.Generator,
    width: int = SCENE_WIDTH,
    height: int = SCENE_HEIGHT,
) -> tuple[GrayImage, BoundingBox]:
    """One scene: noisy cold background plus a warm rectangle."""
    bg = np.clip(rng.normal(0.10, 0.03, size=(height, width)), 0.0, 0.30)
    rect_w = int(rng.integers(16, 25))
    rect_h = int(rng.integers(36, 49))
    x = int(rng.integers(2, width - rect_w - 2))
    y = int(rng.integers(2, height - rect_h - 2))
    body = np.clip(
        rng.normal(BODY_INTENSITY, 0.015, size=(rect_h, rect_w)), 0.75, 0.98
    )
    bg[y : y + rect_h, x : x + rect_w] = body
    return GrayImage(bg, copy=False), BoundingBox(x, y, rect_w, rect_h)


def write_scene_suite(
    out_dir: str | Path, count: int = 50, seed: int = 0
) -> Path:
    """Write `count` scene PNGs plus a manifest; returns the manifest path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    entries = []
    for i in range(count):
        image, box = make_scene(rng)
        name = f"scene_{i:03d}.png"
        save_image(image, out / name)
        entries.append(
            ManifestEntry(str(out / name), (LabeledBox(box, "person"),))
        )
    manifest = out / "manifest.ndjson"
    save_manifest(entries, manifest)
    return manifest
