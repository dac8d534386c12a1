"""Command line interface.

Exit codes: 0 success, 1 data/IO errors (single line on stderr), 2 usage
errors (argparse). Set OF_LOG=DEBUG|INFO|WARNING|ERROR for diagnostics on
stderr.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import cv2
import numpy as np

from .augment import AugmentationConfig, augment_dataset
from .bank import extract_entities, load_bank, save_bank
from .coco import load_dataset, load_image, save_image
from .config import augmentation_config_from_mapping, load_config
from .court import CourtSide, DetectionFailure, detect_playable_region, infer_court_side
from .errors import MalformedAnnotation, MissingFile, OForgeError
from .metric import evaluate_om, predictions_from_json
from .swa import average_checkpoints, write_checkpoint

log = logging.getLogger("oforge")

_IMAGE_SUFFIXES = {".png", ".jpg", ".jpeg", ".bmp"}


def _setup_logging():
    level = os.environ.get("OF_LOG", "WARNING").upper()
    logging.basicConfig(
        level=getattr(logging, level, logging.WARNING),
        stream=sys.stderr,
        format="%(levelname)s %(name)s: %(message)s",
    )


def cmd_extract(args) -> int:
    bundle = load_dataset(args.annotations, args.images)
    bank = extract_entities(bundle)
    save_bank(bank, args.out_bank)
    skipped = bank.skip_report
    print(
        f"entities={len(bank)} skipped_crowd={skipped.get('crowd', 0)} "
        f"skipped_empty={skipped.get('empty', 0)}"
    )
    return 0


def cmd_detect(args) -> int:
    config = load_config(args.config).detector
    images_dir = Path(args.images)
    if not images_dir.is_dir():
        raise MissingFile(str(images_dir))
    paths = sorted(
        p for p in images_dir.iterdir() if p.suffix.lower() in _IMAGE_SUFFIXES
    )
    overlays_dir = Path(args.overlays) if args.overlays else None
    if overlays_dir is not None:
        overlays_dir.mkdir(parents=True, exist_ok=True)
    results = {}
    detected = 0
    for path in paths:
        image = load_image(path)
        outcome = detect_playable_region(image, config)
        if isinstance(outcome, DetectionFailure):
            log.info("detection failed for %s at stage %s", path.name, outcome.stage)
            results[path.name] = {
                "status": "failure",
                "stage": outcome.stage,
                "detail": outcome.detail,
            }
        else:
            detected += 1
            side = infer_court_side(outcome, image.shape[1])
            results[path.name] = {
                "status": "ok",
                "confidence": outcome.confidence,
                "side": side.value,
                "polygon": [[x, y] for x, y in outcome.polygon],
            }
            if overlays_dir is not None:
                overlay = image.copy()
                pts = np.asarray(outcome.polygon, dtype=np.int32).reshape(-1, 1, 2)
                cv2.polylines(overlay, [pts], True, (255, 0, 0), 2)
                save_image(overlay, overlays_dir / f"{path.stem}.png")
    payload = json.dumps(results, sort_keys=True, indent=1)
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(payload)
    else:
        print(payload)
    print(f"images={len(paths)} detected={detected} failed={len(paths) - detected}")
    return 0


def _augment_config(args) -> tuple:
    tool = load_config(args.config)
    overrides = {}
    for flag, key in (
        ("paste_probability", "paste_probability"),
        ("occluder_probability", "occluder_probability"),
        ("max_entities", "max_entities"),
        ("seed", "seed"),
    ):
        value = getattr(args, flag, None)
        if value is not None:
            overrides[key] = value
    if getattr(args, "output_size", None) is not None:
        try:
            w, h = (int(v) for v in args.output_size.lower().split("x"))
        except ValueError:
            raise MalformedAnnotation(
                f"--output-size expects WIDTHxHEIGHT, got {args.output_size!r}"
            ) from None
        overrides["output_size"] = (w, h)
    aug = augmentation_config_from_mapping(overrides, base=tool.augmentation)
    return aug, tool.detector


def _load_side_map(path):
    if path is None:
        return None
    raw = json.loads(Path(path).read_text())
    return {int(k): CourtSide(v) for k, v in raw.items()}


def cmd_augment(args) -> int:
    aug, detector = _augment_config(args)
    bundle = load_dataset(args.annotations, args.images)
    bank = load_bank(args.bank)
    log.info("augmenting %d images with a %d-entity bank", len(bundle.images), len(bank))
    out_bundle = augment_dataset(
        bundle,
        bank,
        aug,
        args.out,
        detector_config=detector,
        side_map=_load_side_map(args.side_map),
        apply_chain=not args.no_chain,
        jobs=args.jobs,
    )
    pastes = occluders = dropped = 0
    with open(Path(args.out) / "provenance.jsonl") as fh:
        for line in fh:
            rec = json.loads(line)
            if "bank_index" in rec:
                pastes += 1
                if rec["occluder"]:
                    occluders += 1
            dropped += len(rec.get("dropped_annotation_ids", ()))
    print(
        f"images={len(out_bundle.images)} pastes={pastes} "
        f"occluders={occluders} dropped={dropped}"
    )
    return 0


def cmd_evaluate(args) -> int:
    gt = load_dataset(args.gt, verify_images=False)
    pred_path = Path(args.pred)
    if not pred_path.is_file():
        raise MissingFile(str(pred_path))
    try:
        payload = json.loads(pred_path.read_text())
    except json.JSONDecodeError as exc:
        raise MalformedAnnotation(f"{pred_path}: invalid JSON: {exc}") from exc
    predictions = predictions_from_json(payload, gt)
    report = evaluate_om(
        gt,
        predictions,
        connectivity=args.connectivity,
        iou_threshold=args.iou_threshold,
        dpr_aggregation=args.dpr_aggregation,
        count_unmatched_in_dpr=args.count_unmatched,
        per_image=args.per_image,
    )
    if args.per_image and report.per_image is not None:
        for image_id in sorted(report.per_image):
            o, d, m = report.per_image[image_id]
            print(f"image={image_id} OIR={o} DPR={d} OM={m}")
    print(f"OIR={report.oir} DPR={report.dpr} OM={report.om}")
    report_path = Path(args.report) if args.report else pred_path.with_suffix(".report.json")
    report_path.parent.mkdir(parents=True, exist_ok=True)
    report_path.write_text(json.dumps(report.to_json(), sort_keys=True, indent=1))
    return 0


def cmd_swa(args) -> int:
    averaged = average_checkpoints(args.inputs, weights=args.weights)
    write_checkpoint(averaged, args.out)
    print(f"checkpoints={len(args.inputs)} tensors={len(averaged)} out={args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="oforge",
        description="Occlusion-aware copy-paste dataset tooling.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="cut annotated instances into an entity bank")
    p.add_argument("--annotations", required=True, help="COCO-style annotation JSON")
    p.add_argument("--images", required=True, help="directory holding the source images")
    p.add_argument("--out-bank", required=True, help="output bank directory")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("detect", help="estimate playable court regions")
    p.add_argument("--images", required=True, help="directory of frames to scan")
    p.add_argument("--out", default=None, help="write JSON results here instead of stdout")
    p.add_argument("--overlays", default=None, help="write debug overlay PNGs to this directory")
    p.add_argument("--config", default=None, help="TOML config with a [detector] table")
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("augment", help="copy-paste augment a dataset")
    p.add_argument("--annotations", required=True, help="COCO-style annotation JSON")
    p.add_argument("--images", required=True, help="directory holding the source images")
    p.add_argument("--bank", required=True, help="entity bank directory")
    p.add_argument("--out", required=True, help="output dataset directory")
    p.add_argument("--config", default=None, help="TOML config file")
    p.add_argument("--seed", type=int, default=None,
                   help="master seed; overrides the config file (default: 0)")
    p.add_argument("--paste-probability", dest="paste_probability", type=float,
                   default=None, help="per-image paste probability (default: 0.8)")
    p.add_argument("--occluder-probability", dest="occluder_probability", type=float,
                   default=None, help="occluder chance per pasted entity (default: 0.7)")
    p.add_argument("--max-entities", dest="max_entities", type=int, default=None,
                   help="cap on pasted entities per image (default: 40)")
    p.add_argument("--output-size", dest="output_size", default=None,
                   help="final WIDTHxHEIGHT after crop and pad (default: 1760x1280)")
    p.add_argument("--side-map", default=None,
                   help="JSON {image_id: left|right} overriding court side on fallback")
    p.add_argument("--no-chain", action="store_true",
                   help="skip the resize/crop/pad chain, keep native frames")
    p.add_argument("--jobs", type=int, default=1,
                   help="worker threads; output bytes do not depend on this")
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("evaluate", help="score predictions with the occlusion metric")
    p.add_argument("--gt", required=True, help="ground-truth annotation JSON")
    p.add_argument("--pred", required=True, help="prediction JSON (dataset or bare list)")
    p.add_argument("--connectivity", type=int, choices=(4, 8), default=4,
                   help="component connectivity for split detection")
    p.add_argument("--iou-threshold", dest="iou_threshold", type=float, default=0.5,
                   help="matching threshold")
    p.add_argument("--dpr-aggregation", dest="dpr_aggregation",
                   choices=("micro", "macro"), default="micro",
                   help="pool disconnected pixels or average per instance")
    p.add_argument("--count-unmatched", dest="count_unmatched", action="store_true",
                   help="count unmatched split instances in the DPR denominator")
    p.add_argument("--per-image", dest="per_image", action="store_true",
                   help="also print one line per image")
    p.add_argument("--report", default=None,
                   help="JSON report path (default: <pred>.report.json)")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("swa", help="average checkpoints element-wise")
    p.add_argument("--inputs", nargs="+", required=True, help="checkpoint files")
    p.add_argument("--out", required=True, help="output checkpoint file")
    p.add_argument("--weights", nargs="+", type=float, default=None,
                   help="per-checkpoint positive weights (default: uniform)")
    p.set_defaults(func=cmd_swa)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    _setup_logging()
    try:
        return args.func(args)
    except OForgeError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: IoFailure: {exc}", file=sys.stderr)
        return 1
