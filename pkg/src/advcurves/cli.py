"""Command-line orchestration.

Subcommands: attack, campaign, transfer, ablate-shapes, augment, defend,
synth-check. Configuration comes from an optional JSON file (--config)
with individual flags taking precedence; every run writes its resolved
config and seed alongside its outputs so runs can be reproduced exactly.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .config import (
    ConfigError,
    RunConfig,
    config_from_file,
    write_config_snapshot,
)
from .evaluation import (
    CampaignReport,
    TransferSample,
    ablation_table,
    defense_eval,
    augment_dataset,
    run_campaign,
    shape_ablation,
    transfer_eval,
)
from .geometry import SHAPE_VARIANTS
from .imaging import (
    BoundingBox,
    load_image,
    load_mask_image,
    save_image,
    save_mask_image,
)
from .oracle import SyntheticOracle
from .pso import AttackResult, run_attack
from .remote import ProcessChannel, RemoteOracle, TcpChannel


def make_oracle_factory(config: RunConfig):
    """Build per-worker oracles from the --oracle spec.

    synthetic            in-process warm-blob detector
    tcp:<host>:<port>    wire protocol over TCP
    cmd:<program ...>    wire protocol over a child's stdin/stdout
    """
    spec = config.oracle
    if spec == "synthetic":
        synth = config.synth_config()
        return lambda: SyntheticOracle(synth)
    if spec.startswith("tcp:"):
        rest = spec[4:]
        host, _, port = rest.rpartition(":")
        if not host or not port.isdigit():
            raise ConfigError(f"bad tcp oracle spec: {spec!r} (want tcp:host:port)")
        return lambda: RemoteOracle(
            TcpChannel(host, int(port), config.oracle_timeout), config.oracle_retries
        )
    if spec.startswith("cmd:"):
        command = spec[4:]
        if not command.strip():
            raise ConfigError("cmd: oracle spec needs a program")
        return lambda: RemoteOracle(
            ProcessChannel(command, config.oracle_timeout), config.oracle_retries
        )
    raise ConfigError(f"unknown oracle spec: {spec!r}")


def _resolve_config(args: argparse.Namespace) -> RunConfig:
    base = config_from_file(args.config) if args.config else RunConfig()
    overrides = {}
    for key in (
        "oracle",
        "seed",
        "k",
        "polarity",
        "out",
        "workers",
        "dump_images",
        "stroke_width",
        "family",
        "alpha",
        "iterations",
        "samples_m",
        "min_box_height",
        "fill",
    ):
        if hasattr(args, key) and getattr(args, key) is not None:
            overrides[key] = getattr(args, key)
    return base.merged(overrides)


def _dump_result_images(
    report: CampaignReport, out: Path
) -> None:
    images = out / "images"
    rasters = out / "rasters"
    images.mkdir(parents=True, exist_ok=True)
    rasters.mkdir(parents=True, exist_ok=True)
    for record in report.records:
        if record.result is None:
            continue
        adv_path = images / f"{record.image_id.replace('#', '_')}_adv.png"
        raster_path = rasters / f"{record.image_id.replace('#', '_')}_raster.png"
        save_image(record.result.adversarial_image, adv_path)
        save_mask_image(record.result.raster, raster_path)
        record.adv_image_path = str(adv_path)
        record.raster_path = str(raster_path)


def _write_report(report: CampaignReport, config: RunConfig, out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    write_config_snapshot(config, out / "config.json")
    report.write_csv(out / "report.csv")
    report.write_json(out / "summary.json")


def _parse_box(text: str) -> BoundingBox:
    try:
        x, y, w, h = (int(v) for v in text.split(","))
    except ValueError as exc:
        raise ConfigError(f"bad box {text!r} (want x,y,w,h)") from exc
    return BoundingBox(x, y, w, h)


def cmd_attack(args: argparse.Namespace) -> int:
    config = _resolve_config(args)
    oracle = make_oracle_factory(config)()
    image = load_image(args.image)
    box = _parse_box(args.box)
    result = run_attack(
        image,
        box,
        oracle,
        k=config.k,
        polarity=config.polarity,
        hyper=config.pso_hyper(),
        eot_config=config.transform_config(),
        seed=config.seed,
        stroke_width=config.stroke_width,
        iou_threshold=config.iou_threshold,
        success_threshold=config.success_threshold,
        target_class=args.target_class,
        family=config.family,
    )
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    write_config_snapshot(config, out / "config.json")
    save_image(result.adversarial_image, out / "adversarial.png")
    save_mask_image(result.raster, out / "raster.png")
    with open(out / "result.json", "w", encoding="utf-8") as fh:
        json.dump(
            {
                "success": result.success,
                "final_confidence": result.final_confidence,
                "queries": result.queries,
                "iterations_used": result.iterations_used,
                "best_params": [float(v) for v in result.best_params],
                "error": result.error,
                "box": box.as_list(),
                "class": args.target_class,
            },
            fh,
            indent=2,
            sort_keys=True,
        )
        fh.write("\n")
    print(
        f"success={result.success} final_confidence={result.final_confidence:.4f} "
        f"queries={result.queries}"
    )
    return 0


def cmd_campaign(args: argparse.Namespace) -> int:
    config = _resolve_config(args)
    report = run_campaign(args.manifest, make_oracle_factory(config), config)
    out = Path(config.out)
    if config.dump_images:
        _dump_result_images(report, out)
    _write_report(report, config, out)
    print(
        f"asr={report.asr:.4f} mean_queries={report.mean_queries:.1f} "
        f"targets={len(report.records)} excluded={len(report.excluded)}"
    )
    return 0


def _load_success_records(src: Path) -> list[dict]:
    summary = src / "summary.json"
    if not summary.exists():
        raise ConfigError(f"no summary.json under {src}")
    with open(summary, encoding="utf-8") as fh:
        data = json.load(fh)
    records = [r for r in data.get("records", []) if r.get("success")]
    if not records:
        raise ConfigError(f"{summary} holds no successful attacks")
    missing = [r["image_id"] for r in records if not r.get("adv_image")]
    if missing:
        raise ConfigError(
            "source campaign lacks dumped images (run it with --dump-images); "
            f"missing for {missing[:3]}..."
        )
    return records


def cmd_transfer(args: argparse.Namespace) -> int:
    config = _resolve_config(args)
    records = _load_success_records(Path(getattr(args, "from")))
    samples = [
        TransferSample(
            image_id=r["image_id"],
            image=load_image(r["adv_image"]),
            target=BoundingBox(*r["box"]),
            target_class=r["class"],
        )
        for r in records
    ]
    oracle = make_oracle_factory(config)()
    report = transfer_eval(samples, oracle, config)
    _write_report(report, config, Path(config.out))
    print(f"transfer_asr={report.asr:.4f} samples={len(report.records)}")
    return 0


def cmd_ablate_shapes(args: argparse.Namespace) -> int:
    config = _resolve_config(args)
    families = [f.strip() for f in args.families.split(",") if f.strip()]
    for family in families:
        if family not in SHAPE_VARIANTS:
            raise ConfigError(f"unknown family {family!r}; pick from {SHAPE_VARIANTS}")
    reports = shape_ablation(args.manifest, make_oracle_factory(config), config, families)
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    write_config_snapshot(config, out / "config.json")
    for family, report in reports.items():
        sub = out / family
        sub.mkdir(parents=True, exist_ok=True)
        if config.dump_images:
            _dump_result_images(report, sub)
        report.write_csv(sub / "report.csv")
        report.write_json(sub / "summary.json")
    table = ablation_table(reports)
    (out / "comparison.txt").write_text(table + "\n", encoding="utf-8")
    print(table)
    return 0


def cmd_augment(args: argparse.Namespace) -> int:
    config = _resolve_config(args)
    ratio = args.ratio if args.ratio is not None else config.augment_ratio
    out = Path(config.out)
    manifest = augment_dataset(
        args.manifest,
        ratio,
        config.k,
        config.polarity,
        config.seed,
        out,
        stroke_width=config.stroke_width,
        min_box_height=config.min_box_height,
    )
    write_config_snapshot(config, out / "config.json")
    print(f"augmented manifest: {manifest}")
    return 0


def cmd_defend(args: argparse.Namespace) -> int:
    config = _resolve_config(args)
    records = _load_success_records(Path(getattr(args, "from")))
    missing = [r["image_id"] for r in records if not r.get("raster")]
    if missing:
        raise ConfigError(
            f"source campaign lacks dumped rasters; missing for {missing[:3]}..."
        )
    results = []
    ids = []
    for r in records:
        results.append(
            AttackResult(
                success=True,
                final_confidence=r["final_confidence"],
                queries=r["queries"],
                best_params=np.asarray(r.get("best_params", []), dtype=np.float64),
                adversarial_image=load_image(r["adv_image"]),
                iterations_used=0,
                raster=load_mask_image(r["raster"]),
                target=BoundingBox(*r["box"]),
                target_class=r["class"],
                k=r["k"],
                polarity=r["polarity"],
                family=r["family"],
            )
        )
        ids.append(r["image_id"])
    oracle = make_oracle_factory(config)()
    report = defense_eval(results, config.fill, oracle, config, image_ids=ids)
    _write_report(report, config, Path(config.out))
    print(f"residual_asr={report.asr:.4f} defended={len(report.records)}")
    return 0


def cmd_synth_check(args: argparse.Namespace) -> int:
    config = _resolve_config(args)
    oracle = SyntheticOracle(config.synth_config())
    image = load_image(args.image)
    detections = oracle.detect(image)
    for det in detections:
        print(
            json.dumps(
                {
                    "box": det.box.as_list(),
                    "obj": det.objectness,
                    "cls": det.class_label,
                },
                sort_keys=True,
            )
        )
    if not detections:
        print("no detections", file=sys.stderr)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="advcurves",
        description="Curve-perturbation attacks on grayscale object detectors.",
        epilog="Precedence: built-in defaults < --config file < individual flags.",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file")
    common.add_argument(
        "--oracle", help="synthetic | tcp:<host:port> | cmd:<program> (wire protocol)"
    )
    common.add_argument("--seed", type=int)
    common.add_argument("--k", type=int, help="number of curves")
    common.add_argument("--polarity", choices=["black", "white"])
    common.add_argument("--out", help="output directory")
    common.add_argument("--workers", type=int, help="parallel per-image tasks (1 = deterministic)")
    common.add_argument(
        "--dump-images", action="store_const", const=True, dest="dump_images",
        help="save adversarial PNGs and rasters beside the report",
    )
    common.add_argument("--stroke-width", type=float, dest="stroke_width")
    common.add_argument("--alpha", type=int, help="swarm population size")
    common.add_argument("--iterations", type=int, help="swarm iteration budget")
    common.add_argument("--samples-m", type=int, dest="samples_m")
    common.add_argument("--min-box-height", type=int, dest="min_box_height",
                        help="drop manifest boxes with height <= this")

    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("attack", parents=[common], help="attack one image")
    p.add_argument("--image", required=True)
    p.add_argument("--box", required=True, help="target box as x,y,w,h")
    p.add_argument("--class", dest="target_class", default="person")
    p.set_defaults(func=cmd_attack)

    p = sub.add_parser("campaign", parents=[common], help="attack every manifest target")
    p.add_argument("--manifest", required=True)
    p.set_defaults(func=cmd_campaign)

    p = sub.add_parser("transfer", parents=[common],
                       help="re-detect stored adversarial samples with another oracle")
    p.add_argument("--from", required=True, help="source campaign output directory")
    p.set_defaults(func=cmd_transfer)

    p = sub.add_parser("ablate-shapes", parents=[common],
                       help="run one campaign per perturbation shape family")
    p.add_argument("--manifest", required=True)
    p.add_argument("--families", default=",".join(SHAPE_VARIANTS))
    p.set_defaults(func=cmd_ablate_shapes)

    p = sub.add_parser("augment", parents=[common],
                       help="emit clean + randomly-perturbed training images")
    p.add_argument("--manifest", required=True)
    p.add_argument("--ratio", type=int, help="adversarial variants per clean image")
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("defend", parents=[common],
                       help="non-blind inpainting defense over a campaign's successes")
    p.add_argument("--from", required=True, help="source campaign output directory")
    p.add_argument("--fill", type=float, help="inpainting intensity in [0,1]")
    p.set_defaults(func=cmd_defend)

    p = sub.add_parser("synth-check", parents=[common],
                       help="print synthetic-oracle detections for an image")
    p.add_argument("--image", required=True)
    p.set_defaults(func=cmd_synth_check)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
