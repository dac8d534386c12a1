"""Occlusion metric for instance segmentation.

A ground-truth instance is "split" when its mask has two or more connected
components: something in front cut it apart. The metric asks two questions
about a prediction set:

    OIR  how many split instances were recalled at all (IoU match)
    DPR  how much of their disconnected area (everything outside the main
         component) the matched predictions recover

and reports OM = OIR * DPR. Both ratios define an empty denominator as a
vacuous 1.0 so un-split datasets score perfectly.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .coco import DatasetBundle, InstanceAnnotation, annotation_mask
from .errors import EmptyGroundTruth
from .masks import connected_components, mask_iou


@dataclass
class SplitInstance:
    annotation_id: int
    image_id: int
    mask: np.ndarray
    main_component_label: int
    disconnected_pixels: np.ndarray

    @property
    def disconnected_total(self) -> int:
        return int(self.disconnected_pixels.sum())


@dataclass
class PerInstanceRecord:
    annotation_id: int
    image_id: int
    matched_prediction_id: int | None
    disconnected_total: int
    disconnected_recalled: int


@dataclass
class OMReport:
    oir: float
    dpr: float
    om: float
    split_instance_count: int
    recalled_count: int
    per_instance: list = field(default_factory=list)
    per_image: dict | None = None

    def to_json(self) -> dict:
        payload = {
            "oir": self.oir,
            "dpr": self.dpr,
            "om": self.om,
            "split_instance_count": self.split_instance_count,
            "recalled_count": self.recalled_count,
            "per_instance": [
                {
                    "annotation_id": r.annotation_id,
                    "image_id": r.image_id,
                    "matched_prediction_id": r.matched_prediction_id,
                    "disconnected_total": r.disconnected_total,
                    "disconnected_recalled": r.disconnected_recalled,
                }
                for r in self.per_instance
            ],
        }
        if self.per_image is not None:
            payload["per_image"] = {
                str(k): {"oir": v[0], "dpr": v[1], "om": v[2]}
                for k, v in self.per_image.items()
            }
        return payload


def find_split_instances(annotations, height: int, width: int, connectivity: int = 4) -> list:
    """Instances of one image whose mask splits into >= 2 components.

    The main component is the largest one; ties go to the lowest label,
    which is the component met first in row-major scan order.
    """
    out = []
    for ann in annotations:
        mask = annotation_mask(ann, height, width)
        comps = connected_components(mask, connectivity)
        if comps.count < 2:
            continue
        sizes = np.asarray(comps.component_sizes)
        main = int(sizes.argmax()) + 1
        out.append(
            SplitInstance(
                annotation_id=ann.id,
                image_id=ann.image_id,
                mask=mask,
                main_component_label=main,
                disconnected_pixels=(comps.labels > 0) & (comps.labels != main),
            )
        )
    return out


def match_split_instances(splits, predictions, height, width, iou_threshold: float = 0.5) -> dict:
    """Greedy one-to-one matching of split instances to predictions.

    Pairs at or above the IoU threshold are taken best-first; exact ties
    break on lower ground-truth id, then lower prediction id. Returns
    {gt annotation id: (prediction id, prediction mask)}.
    """
    pred_masks = [(p.id, annotation_mask(p, height, width)) for p in predictions]
    pairs = []
    for split in splits:
        for pred_id, pmask in pred_masks:
            iou = mask_iou(split.mask, pmask)
            if iou >= iou_threshold:
                pairs.append((iou, split.annotation_id, pred_id, pmask))
    pairs.sort(key=lambda t: (-t[0], t[1], t[2]))
    matched_gt = {}
    used_pred = set()
    for _iou, gt_id, pred_id, pmask in pairs:
        if gt_id in matched_gt or pred_id in used_pred:
            continue
        matched_gt[gt_id] = (pred_id, pmask)
        used_pred.add(pred_id)
    return matched_gt


def _ratio(numerator, denominator) -> float:
    return numerator / denominator if denominator else 1.0


def _aggregate(records, dpr_aggregation: str, count_unmatched_in_dpr: bool):
    total = len(records)
    recalled = sum(1 for r in records if r.matched_prediction_id is not None)
    oir = _ratio(recalled, total)
    scored = [
        r
        for r in records
        if r.matched_prediction_id is not None or count_unmatched_in_dpr
    ]
    if dpr_aggregation == "micro":
        dpr = _ratio(
            sum(r.disconnected_recalled for r in scored),
            sum(r.disconnected_total for r in scored),
        )
    elif dpr_aggregation == "macro":
        ratios = [_ratio(r.disconnected_recalled, r.disconnected_total) for r in scored]
        dpr = float(np.mean(ratios)) if ratios else 1.0
    else:
        raise ValueError(f"dpr_aggregation must be 'micro' or 'macro', got {dpr_aggregation!r}")
    return oir, dpr, oir * dpr, total, recalled


def evaluate_om(
    gt: DatasetBundle,
    predictions,
    connectivity: int = 4,
    iou_threshold: float = 0.5,
    dpr_aggregation: str = "micro",
    count_unmatched_in_dpr: bool = False,
    per_image: bool = False,
) -> OMReport:
    """Score predictions against ground truth.

    predictions is a DatasetBundle or a flat list of InstanceAnnotation;
    only the images present in gt are considered. Raises EmptyGroundTruth
    when gt has no images.
    """
    if not gt.images:
        raise EmptyGroundTruth("ground truth has no images")
    if isinstance(predictions, DatasetBundle):
        pred_list = predictions.annotations
    else:
        pred_list = list(predictions)
    preds_by_image = {}
    for p in pred_list:
        preds_by_image.setdefault(p.image_id, []).append(p)

    records = []
    image_ids = {}
    for rec in sorted(gt.images, key=lambda r: r.id):
        splits = find_split_instances(
            gt.annotations_for(rec.id), rec.height, rec.width, connectivity
        )
        matched = match_split_instances(
            splits, preds_by_image.get(rec.id, []), rec.height, rec.width, iou_threshold
        )
        start = len(records)
        for split in splits:
            hit = matched.get(split.annotation_id)
            recalled = 0
            if hit is not None:
                recalled = int(np.logical_and(split.disconnected_pixels, hit[1]).sum())
            records.append(
                PerInstanceRecord(
                    annotation_id=split.annotation_id,
                    image_id=split.image_id,
                    matched_prediction_id=hit[0] if hit is not None else None,
                    disconnected_total=split.disconnected_total,
                    disconnected_recalled=recalled,
                )
            )
        image_ids[rec.id] = (start, len(records))

    oir, dpr, om, total, recalled = _aggregate(records, dpr_aggregation, count_unmatched_in_dpr)
    report = OMReport(
        oir=oir,
        dpr=dpr,
        om=om,
        split_instance_count=total,
        recalled_count=recalled,
        per_instance=records,
    )
    if per_image:
        report.per_image = {}
        for image_id, (start, stop) in image_ids.items():
            o, d, m, _t, _r = _aggregate(
                records[start:stop], dpr_aggregation, count_unmatched_in_dpr
            )
            report.per_image[image_id] = (o, d, m)
    return report


def predictions_from_json(payload, gt: DatasetBundle) -> list:
    """Build prediction annotations from parsed JSON.

    Accepts either a full dataset object or a bare list of annotation
    records; records without ids get sequential ones in file order.
    """
    from .coco import parse_segmentation
    from .errors import DanglingReference, MalformedAnnotation

    if isinstance(payload, dict):
        raw_list = payload.get("annotations")
        if not isinstance(raw_list, list):
            raise MalformedAnnotation("prediction object lacks an 'annotations' list")
    elif isinstance(payload, list):
        raw_list = payload
    else:
        raise MalformedAnnotation("predictions must be a JSON object or list")

    by_id = {rec.id: rec for rec in gt.images}
    out = []
    for i, raw in enumerate(raw_list):
        if not isinstance(raw, dict):
            raise MalformedAnnotation(f"prediction record {i} is not an object")
        pred_id = int(raw.get("id", i + 1))
        try:
            image_id = int(raw["image_id"])
        except (KeyError, TypeError, ValueError) as exc:
            raise MalformedAnnotation(f"prediction record {i}: bad image_id") from exc
        rec = by_id.get(image_id)
        if rec is None:
            raise DanglingReference(f"prediction {pred_id} references missing image {image_id}")
        seg = parse_segmentation(raw["segmentation"], pred_id, rec.height, rec.width)
        out.append(
            InstanceAnnotation(
                id=pred_id,
                image_id=image_id,
                category_id=int(raw.get("category_id", 1)),
                segmentation=seg,
                bbox=tuple(float(v) for v in raw.get("bbox", (0, 0, 0, 0))),
                area=float(raw.get("area", 0.0)),
                iscrowd=int(raw.get("iscrowd", 0)),
            )
        )
    return out
