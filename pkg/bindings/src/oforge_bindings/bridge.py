"""In-process bridge to the oforge augmenter and occlusion metric.

Training pipelines call these entry points directly instead of shelling out
to the CLI. Given the same inputs and seed, bind_augment reproduces
``oforge augment --no-chain`` on a single-image dataset pixel for pixel and
field for field, and bind_evaluate_om returns exactly the mapping that
``oforge evaluate`` writes as its JSON report.

The resize/crop/pad chain is deliberately left out here: it is dataset
packaging, while these calls sit in a per-sample hot loop and must hand the
frame back at its native size (paste_probability 0 returns the input
unchanged).

Arrays are taken zero-copy when already contiguous with the declared dtype;
anything else costs one normalizing copy. No module state is mutated and
the heavy pixel work runs inside numpy/cv2 kernels that release the GIL,
so concurrent calls are safe.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from oforge import (
    InstanceAnnotation,
    annotation_mask,
    augmentation_config_from_mapping,
    copy_paste,
    evaluate_om,
    load_bank,
    load_dataset,
    parse_segmentation,
    predictions_from_json,
    resolve_region,
    save_bank,
)
from oforge import extract_entities as _extract_from_bundle
from oforge.court import CourtSide
from oforge.errors import MalformedAnnotation, MissingFile
from oforge.validation import check_image


@dataclass
class BoundSample:
    """One augmented frame handed back to the host pipeline.

    annotations mirror InstanceAnnotation and are id-sorted; masks[i] is
    the decoded (H, W) boolean mask of annotations[i], matching the image.
    """

    image: np.ndarray
    annotations: list
    masks: list


def _coerce_annotation(raw, height: int, width: int) -> InstanceAnnotation:
    # accepts either the primary dataclass or a COCO-style record
    if isinstance(raw, InstanceAnnotation):
        return raw
    if not isinstance(raw, dict):
        raise MalformedAnnotation(
            f"unsupported annotation record of type {type(raw).__name__}"
        )
    try:
        ann_id = int(raw["id"])
        image_id = int(raw["image_id"])
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedAnnotation(f"bad annotation record {raw!r}") from exc
    try:
        seg = parse_segmentation(raw["segmentation"], ann_id, height, width)
        bbox = raw.get("bbox", (0.0, 0.0, 0.0, 0.0))
        if not isinstance(bbox, (list, tuple)) or len(bbox) != 4:
            raise MalformedAnnotation(f"annotation {ann_id}: bad bbox {bbox!r}")
        return InstanceAnnotation(
            id=ann_id,
            image_id=image_id,
            category_id=int(raw["category_id"]),
            segmentation=seg,
            bbox=tuple(float(v) for v in bbox),
            area=float(raw.get("area", 0.0)),
            iscrowd=int(raw.get("iscrowd", 0)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedAnnotation(f"annotation {ann_id}: {exc}") from exc


def bind_augment(
    image,
    annotations,
    bank_path,
    config_mapping=None,
    seed: int = 0,
    *,
    image_id=None,
    side=None,
) -> BoundSample:
    """Copy-paste augment one frame against a saved entity bank.

    image is a (H, W, 3) uint8 array and annotations a list of
    InstanceAnnotation or COCO-style records for that frame. config_mapping
    takes the same keys as the [augmenter] config table; unknown keys raise
    KeyError naming the key, and the explicit seed argument wins over any
    "seed" entry. image_id defaults to the one the annotations carry (0 if
    there are none) and keys the random stream together with seed. side
    optionally forces the fallback placement side like the CLI side map.
    """
    img = check_image(image)
    if not img.flags["C_CONTIGUOUS"]:
        img = np.ascontiguousarray(img)  # the single documented copy
    height, width = img.shape[:2]

    anns = [_coerce_annotation(raw, height, width) for raw in annotations]
    anns.sort(key=lambda a: a.id)
    seen = set()
    for ann in anns:
        if ann.id in seen:
            raise MalformedAnnotation(f"duplicate annotation id {ann.id}")
        seen.add(ann.id)
    image_ids = {a.image_id for a in anns}
    if len(image_ids) > 1:
        raise MalformedAnnotation(
            f"annotations span multiple images: {sorted(image_ids)}"
        )
    if image_id is None:
        image_id = image_ids.pop() if image_ids else 0

    merged = dict(config_mapping or {})
    merged["seed"] = int(seed)
    config = augmentation_config_from_mapping(merged)

    bank = load_bank(bank_path)
    if side is not None and not isinstance(side, CourtSide):
        side = CourtSide(side)
    region, _failure = resolve_region(img, None, side)

    # same stream keying and id block as the dataset runner on image index 0
    rng = np.random.default_rng([int(config.seed), int(image_id)])
    base = max((a.id for a in anns), default=0) + 1
    sample = copy_paste(
        img, anns, bank, region, config, rng, id_start=base, image_id=image_id
    )

    out_annotations = sorted(sample.annotations, key=lambda a: a.id)
    out_h, out_w = sample.image.shape[:2]
    masks = [annotation_mask(a, out_h, out_w) for a in out_annotations]
    return BoundSample(image=sample.image, annotations=out_annotations, masks=masks)


def bind_evaluate_om(
    gt_path,
    pred_path,
    connectivity: int = 4,
    iou_threshold: float = 0.5,
    *,
    dpr_aggregation: str = "micro",
    count_unmatched_in_dpr: bool = False,
    per_image: bool = False,
) -> dict:
    """Score a prediction file against ground truth, in-process.

    Returns the same mapping the CLI writes as its JSON report: oir/dpr/om,
    split counts and one record per split instance (plus per_image when
    requested).
    """
    gt = load_dataset(gt_path, verify_images=False)
    pred_path = Path(pred_path)
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
        connectivity=connectivity,
        iou_threshold=iou_threshold,
        dpr_aggregation=dpr_aggregation,
        count_unmatched_in_dpr=count_unmatched_in_dpr,
        per_image=per_image,
    )
    return report.to_json()


def extract_entities(annotation_path, image_root, out_bank=None):
    """Cut paste-source entities from a dataset, optionally saving the bank.

    Mirrors the extract command: images are verified against image_root and
    the returned bank carries the crowd/empty skip tally.
    """
    bundle = load_dataset(annotation_path, image_root)
    bank = _extract_from_bundle(bundle)
    if out_bank is not None:
        save_bank(bank, out_bank)
    return bank
