"""Run configuration: one flat document holding every tunable.

Loaded from a JSON file, overridden by CLI flags, and echoed verbatim
next to every run's outputs so the snapshot fully determines the run.
Unknown keys fail fast.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from pathlib import Path

from .eot import TransformConfig
from .geometry import POLARITIES, SHAPE_VARIANTS
from .oracle import SynthDetectorConfig
from .pso import PsoHyper

# The non-blind inpainting constant: gray level 178 as an intensity.
DEFAULT_DEFENSE_FILL = 178 / 255


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    # perturbation
    k: int = 2
    polarity: str = "black"
    stroke_width: float | None = None  # None = 5% of target box width
    family: str = "bezier"
    # swarm
    omega: float = 0.9
    c1: float = 1.6
    c2: float = 1.4
    r1: float | str = 0.5
    r2: float | str = 0.5
    omega_end: float | None = None
    alpha: int = 10
    iterations: int = 40
    vmax: float = 0.25
    # transform distribution
    rotation_range: float = 5.0
    translate_range: float = 0.02
    scale_lo: float = 0.95
    scale_hi: float = 1.05
    brightness_range: float = 0.05
    downsample_max: int = 2
    samples_m: int = 1
    # objective
    iou_threshold: float = 0.45
    success_threshold: float = 0.5
    # synthetic oracle
    warm_threshold: float = 0.6
    min_blob_area: int = 64
    reference_fill: float = 0.9
    # oracle transport
    oracle: str = "synthetic"
    oracle_timeout: float = 30.0
    oracle_retries: int = 1
    # harness
    seed: int = 0
    out: str = "out"
    workers: int = 1
    dump_images: bool = False
    min_box_height: int | None = None
    # defense / augmentation
    fill: float = DEFAULT_DEFENSE_FILL
    augment_ratio: int = 5

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ConfigError("k must be >= 1")
        if self.polarity not in POLARITIES:
            raise ConfigError(f"polarity must be one of {POLARITIES}")
        if self.family not in SHAPE_VARIANTS:
            raise ConfigError(f"family must be one of {SHAPE_VARIANTS}")
        if self.stroke_width is not None and self.stroke_width < 1.0:
            raise ConfigError("stroke_width must be >= 1")
        if not 0.0 < self.success_threshold < 1.0:
            raise ConfigError("success_threshold must be in (0, 1)")
        if not 0.0 < self.iou_threshold <= 1.0:
            raise ConfigError("iou_threshold must be in (0, 1]")
        if not 0.0 <= self.fill <= 1.0:
            raise ConfigError("fill must be in [0, 1]")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.augment_ratio < 1:
            raise ConfigError("augment_ratio must be >= 1")
        if self.seed < 0:
            raise ConfigError("seed must be a non-negative integer")
        # Delegate range checks to the owning modules.
        try:
            self.pso_hyper()
            self.transform_config()
            self.synth_config()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def pso_hyper(self) -> PsoHyper:
        return PsoHyper(
            omega=self.omega,
            c1=self.c1,
            c2=self.c2,
            r1=self.r1,
            r2=self.r2,
            alpha=self.alpha,
            iterations=self.iterations,
            vmax=self.vmax,
            omega_end=self.omega_end,
        )

    def transform_config(self) -> TransformConfig:
        return TransformConfig(
            rotation_range=self.rotation_range,
            translate_range=self.translate_range,
            scale_range=(self.scale_lo, self.scale_hi),
            brightness_range=self.brightness_range,
            downsample_max=self.downsample_max,
            samples_m=self.samples_m,
        )

    def synth_config(self) -> SynthDetectorConfig:
        return SynthDetectorConfig(
            warm_threshold=self.warm_threshold,
            min_blob_area=self.min_blob_area,
            reference_fill=self.reference_fill,
        )

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def merged(self, overrides: dict) -> "RunConfig":
        base = self.to_dict()
        for key, value in overrides.items():
            if key not in base:
                raise ConfigError(f"unknown config key: {key!r}")
            if value is not None:
                base[key] = value
        return RunConfig(**base)


_FIELD_NAMES = {f.name for f in dataclasses.fields(RunConfig)}


def config_from_dict(data: dict) -> RunConfig:
    unknown = set(data) - _FIELD_NAMES
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    return RunConfig(**data)


def config_from_file(path: str | Path) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"config file {path} must hold a JSON object")
    return config_from_dict(data)


def write_config_snapshot(config: RunConfig, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(config.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
