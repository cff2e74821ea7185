"""Campaign-level metrics, transfer/ablation/defense harnesses, reports.

A campaign attacks every detectable target in a manifest and aggregates
the attack success rate (fraction of previously-detected targets whose
confidence falls below the threshold) plus mean query counts. Reports
serialize to a per-target CSV and a JSON summary whose config snapshot
fully determines the run.
"""

from __future__ import annotations

import csv
import json
import logging
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .config import RunConfig
from .geometry import decode_params, rasterize_curveset
from .imaging import (
    BoundingBox,
    GrayImage,
    LabeledBox,
    ManifestEntry,
    fuse,
    load_image,
    load_manifest,
    make_mask,
    save_image,
    save_manifest,
)
from .oracle import DetectorOracle, target_confidence
from .pso import AttackResult, attack_bounds, default_stroke_width, run_attack

log = logging.getLogger(__name__)

REPORT_VERSION = 1

OracleFactory = Callable[[], DetectorOracle]


def asr(confidences: Sequence[float], threshold: float) -> float:
    """Attack success rate: fraction of confidences below the threshold."""
    if len(confidences) == 0:
        raise ValueError("cannot compute ASR over an empty confidence list")
    if not 0.0 < threshold < 1.0:
        raise ValueError("threshold must be in (0, 1)")
    detected = sum(1 for c in confidences if c >= threshold)
    return (len(confidences) - detected) / len(confidences)


@dataclass
class TargetRecord:
    """Per-target outcome row."""

    image_id: str
    image_path: str
    box: BoundingBox
    class_label: str
    clean_confidence: float | None
    success: bool
    queries: int
    final_confidence: float
    k: int
    polarity: str
    family: str
    error: str | None = None
    adv_image_path: str | None = None
    raster_path: str | None = None
    best_params: list[float] = field(default_factory=list)
    result: AttackResult | None = None  # in-process only, not serialized


@dataclass
class CampaignReport:
    kind: str
    records: list[TargetRecord]
    asr: float
    mean_queries: float
    config: dict
    seed: int
    excluded: list[dict] = field(default_factory=list)
    skipped: list[dict] = field(default_factory=list)
    protocol_version: int = REPORT_VERSION

    def recompute(self, threshold: float) -> tuple[float, float]:
        """Re-derive the aggregates from the per-record rows."""
        return (
            asr([r.final_confidence for r in self.records], threshold),
            float(np.mean([r.queries for r in self.records])),
        )

    def summary_dict(self) -> dict:
        return {
            "protocol_version": self.protocol_version,
            "kind": self.kind,
            "seed": self.seed,
            "asr": self.asr,
            "mean_queries": self.mean_queries,
            "n_targets": len(self.records),
            "config": self.config,
            "excluded": self.excluded,
            "skipped": self.skipped,
            "records": [
                {
                    "image_id": r.image_id,
                    "image": r.image_path,
                    "box": r.box.as_list(),
                    "class": r.class_label,
                    "clean_confidence": r.clean_confidence,
                    "success": r.success,
                    "queries": r.queries,
                    "final_confidence": r.final_confidence,
                    "k": r.k,
                    "polarity": r.polarity,
                    "family": r.family,
                    "error": r.error,
                    "adv_image": r.adv_image_path,
                    "raster": r.raster_path,
                    "best_params": r.best_params,
                }
                for r in self.records
            ],
        }

    def write_json(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.summary_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(
                ["image_id", "success", "queries", "final_confidence", "k", "polarity", "family"]
            )
            for r in self.records:
                writer.writerow(
                    [
                        r.image_id,
                        "true" if r.success else "false",
                        r.queries,
                        repr(r.final_confidence),
                        r.k,
                        r.polarity,
                        r.family,
                    ]
                )


def _resolve_entries(
    manifest: str | Path | Sequence[ManifestEntry], min_box_height: int | None
) -> tuple[list[ManifestEntry], list[dict]]:
    if isinstance(manifest, (str, Path)):
        entries, bad = load_manifest(manifest, min_box_height)
        skipped = [{"line": line, "reason": reason} for line, reason in bad]
        for item in skipped:
            log.warning("skipping manifest line %s: %s", item["line"], item["reason"])
        return entries, skipped
    return list(manifest), []


def _image_id(entry: ManifestEntry, box_index: int) -> str:
    return f"{Path(entry.image).stem}#{box_index}"


class _OraclePool:
    """One oracle per worker thread, built lazily from the factory."""

    def __init__(self, factory: OracleFactory):
        self._factory = factory
        self._local = threading.local()

    def get(self) -> DetectorOracle:
        oracle = getattr(self._local, "oracle", None)
        if oracle is None:
            oracle = self._factory()
            self._local.oracle = oracle
        return oracle


def run_campaign(
    manifest: str | Path | Sequence[ManifestEntry],
    oracle_factory: OracleFactory,
    config: RunConfig,
    family: str | None = None,
) -> CampaignReport:
    """Attack every detectable target listed in the manifest.

    Targets whose clean confidence is already below the success threshold
    are excluded from the true-positive pool (they are reported, not
    silently dropped). Raises if the pool ends up empty.
    """
    family = family if family is not None else config.family
    entries, skipped = _resolve_entries(manifest, config.min_box_height)
    # Entries without ground-truth boxes contribute one auto-selected
    # target: the highest-objectness detection on the clean image.
    targets: list[tuple[int, int, ManifestEntry, LabeledBox | None]] = []
    for ei, entry in enumerate(entries):
        if entry.boxes:
            for bi, labeled in enumerate(entry.boxes):
                targets.append((ei, bi, entry, labeled))
        else:
            targets.append((ei, 0, entry, None))

    seeds = np.random.SeedSequence(config.seed).spawn(len(targets))
    pool = _OraclePool(oracle_factory)
    hyper = config.pso_hyper()
    eot = config.transform_config()

    records: list[TargetRecord | None] = [None] * len(targets)
    excluded: list[dict] = []
    lock = threading.Lock()

    def attack_one(ti: int) -> None:
        ei, bi, entry, labeled = targets[ti]
        image_id = _image_id(entry, bi)
        oracle = pool.get()
        try:
            image = load_image(entry.image)
        except OSError as exc:
            with lock:
                skipped.append({"line": entry.image, "reason": str(exc)})
            log.warning("skipping unreadable image %s: %s", entry.image, exc)
            return
        detections = oracle.detect(image)
        if labeled is None:
            if not detections:
                with lock:
                    excluded.append({"image_id": image_id, "clean_confidence": 0.0})
                return
            best = max(detections, key=lambda d: d.objectness)
            labeled = LabeledBox(best.box, best.class_label)
        clean_conf = target_confidence(
            detections, labeled.box, config.iou_threshold, labeled.class_label
        )
        if clean_conf < config.success_threshold:
            with lock:
                excluded.append({"image_id": image_id, "clean_confidence": clean_conf})
            return
        result = run_attack(
            image,
            labeled.box,
            oracle,
            k=config.k,
            polarity=config.polarity,
            hyper=hyper,
            eot_config=eot,
            seed=seeds[ti],
            stroke_width=config.stroke_width,
            iou_threshold=config.iou_threshold,
            success_threshold=config.success_threshold,
            target_class=labeled.class_label,
            family=family,
        )
        records[ti] = TargetRecord(
            image_id=image_id,
            image_path=entry.image,
            box=labeled.box,
            class_label=labeled.class_label,
            clean_confidence=clean_conf,
            success=result.success,
            queries=result.queries,
            final_confidence=result.final_confidence,
            k=result.k,
            polarity=result.polarity,
            family=result.family,
            error=result.error,
            best_params=[float(v) for v in result.best_params],
            result=result,
        )

    if config.workers > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as ex:
            list(ex.map(attack_one, range(len(targets))))
    else:
        for ti in range(len(targets)):
            attack_one(ti)

    kept = [r for r in records if r is not None]
    if not kept:
        raise ValueError(
            "no clean true positives: the oracle detected none of the manifest targets"
        )
    report = CampaignReport(
        kind=f"campaign:{family}",
        records=kept,
        asr=asr([r.final_confidence for r in kept], config.success_threshold),
        mean_queries=float(np.mean([r.queries for r in kept])),
        config=config.to_dict(),
        seed=config.seed,
        excluded=excluded,
        skipped=skipped,
    )
    return report


def attack_results(report: CampaignReport) -> list[AttackResult]:
    """The AttackResult objects attached to an in-process campaign report."""
    return [r.result for r in report.records if r.result is not None]


@dataclass(frozen=True)
class TransferSample:
    """A previously-successful adversarial image and its target."""

    image_id: str
    image: GrayImage
    target: BoundingBox
    target_class: str = "person"


def transfer_eval(
    samples: Sequence[TransferSample],
    oracle: DetectorOracle,
    config: RunConfig,
) -> CampaignReport:
    """Re-detect stored adversarial samples against another oracle.

    No re-optimization: exactly one query per sample. The transfer ASR is
    the usual threshold count over the re-detected confidences.
    """
    if not samples:
        raise ValueError("transfer evaluation needs at least one sample")
    records = []
    for s in samples:
        conf = target_confidence(
            oracle.detect(s.image), s.target, config.iou_threshold, s.target_class
        )
        records.append(
            TargetRecord(
                image_id=s.image_id,
                image_path="",
                box=s.target,
                class_label=s.target_class,
                clean_confidence=None,
                success=conf < config.success_threshold,
                queries=1,
                final_confidence=conf,
                k=config.k,
                polarity=config.polarity,
                family=config.family,
            )
        )
    return CampaignReport(
        kind="transfer",
        records=records,
        asr=asr([r.final_confidence for r in records], config.success_threshold),
        mean_queries=1.0,
        config=config.to_dict(),
        seed=config.seed,
    )


def shape_ablation(
    manifest: str | Path | Sequence[ManifestEntry],
    oracle_factory: OracleFactory,
    config: RunConfig,
    families: Sequence[str],
) -> dict[str, CampaignReport]:
    """Run one campaign per shape family with identical seeds."""
    if not families:
        raise ValueError("shape ablation needs at least one family")
    return {
        family: run_campaign(manifest, oracle_factory, config, family=family)
        for family in families
    }


def ablation_table(reports: dict[str, CampaignReport]) -> str:
    """Human-readable comparison table: ASR and mean queries per family."""
    lines = [f"{'family':<12} {'asr':>8} {'mean_queries':>14}"]
    for family, report in reports.items():
        lines.append(f"{family:<12} {report.asr:>8.3f} {report.mean_queries:>14.1f}")
    return "\n".join(lines)


def augment_dataset(
    manifest: str | Path | Sequence[ManifestEntry],
    ratio_adv_per_clean: int,
    k: int,
    polarity: str,
    seed: int,
    out_dir: str | Path,
    stroke_width: float | None = None,
    min_box_height: int | None = None,
) -> Path:
    """Emit clean images plus randomly-perturbed variants for training.

    Each clean image yields `ratio` copies fused with random (not
    optimized) curve sets confined to its target boxes; boxes are copied
    unchanged. Returns the new manifest path.
    """
    if ratio_adv_per_clean < 1:
        raise ValueError("ratio must be >= 1")
    entries, skipped = _resolve_entries(manifest, min_box_height)
    for item in skipped:
        log.warning("augment: skipping %s (%s)", item["line"], item["reason"])
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    new_entries: list[ManifestEntry] = []
    for entry in entries:
        image = load_image(entry.image)
        stem = Path(entry.image).stem
        clean_path = out / f"{stem}_clean.png"
        save_image(image, clean_path)
        new_entries.append(ManifestEntry(str(clean_path), entry.boxes))
        for j in range(ratio_adv_per_clean):
            adv = image
            for labeled in entry.boxes:
                box = labeled.box
                width = (
                    stroke_width
                    if stroke_width is not None
                    else default_stroke_width(box)
                )
                bounds = attack_bounds("bezier", box, (image.width, image.height), k)
                lo, hi = bounds
                params = rng.uniform(lo, hi)
                curveset = decode_params(params, k, bounds, polarity, width)
                raster = rasterize_curveset(curveset, (image.width, image.height))
                mask = make_mask(box, (image.width, image.height))
                adv = fuse(adv, raster, polarity, mask)
            adv_path = out / f"{stem}_adv{j:02d}.png"
            save_image(adv, adv_path)
            new_entries.append(ManifestEntry(str(adv_path), entry.boxes))
    manifest_path = out / "manifest.ndjson"
    save_manifest(new_entries, manifest_path)
    return manifest_path


def defense_eval(
    results: Sequence[AttackResult],
    fill: float,
    oracle: DetectorOracle,
    config: RunConfig,
    image_ids: Sequence[str] | None = None,
) -> CampaignReport:
    """Non-blind inpainting defense over previously-successful attacks.

    Each successful adversarial image has its recorded perturbation raster
    overwritten with the fill intensity and is re-detected; the residual
    ASR is the fraction still below the success threshold afterwards.
    """
    from .imaging import inpaint

    if image_ids is None:
        image_ids = [f"sample_{i:03d}" for i in range(len(results))]
    pairs = [(s, r) for s, r in zip(image_ids, results) if r.success]
    if not pairs:
        raise ValueError("defense evaluation needs at least one successful attack")
    records = []
    for sample_id, result in pairs:
        healed = inpaint(result.adversarial_image, result.raster, fill)
        conf = target_confidence(
            oracle.detect(healed), result.target, config.iou_threshold, result.target_class
        )
        records.append(
            TargetRecord(
                image_id=sample_id,
                image_path="",
                box=result.target,
                class_label=result.target_class,
                clean_confidence=None,
                success=conf < config.success_threshold,
                queries=1,
                final_confidence=conf,
                k=result.k,
                polarity=result.polarity,
                family=result.family,
            )
        )
    return CampaignReport(
        kind="defense",
        records=records,
        asr=asr([r.final_confidence for r in records], config.success_threshold),
        mean_queries=1.0,
        config=config.to_dict(),
        seed=config.seed,
    )
