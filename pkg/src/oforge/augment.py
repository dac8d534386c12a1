"""Location-aware copy-paste with occlusion simulation.

copy_paste composites bank entities into a frame at anchors drawn from the
playable region (or the side fallback bounds), optionally stacking a second
"occluder" entity over the top-left quadrant of each paste, and keeps every
annotation's visible pixels consistent with the final composite.

base_transform_chain applies the resize / photometric / crop / pad pipeline
that normalizes frames to the training resolution.

All randomness flows through one numpy Generator with a fixed draw order,
so a (seed, image_id) pair replays byte-identically:

    paste event, entity count, then per paste: bank index, jitter (hflip,
    scale, rotation, brightness, contrast, saturation, hue), anchor,
    occluder coin, and for a pasted occluder its own bank index, jitter
    and quadrant position. The chain then draws scale index, photometric
    jitter, crop offset.
"""
from __future__ import annotations

import dataclasses
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import cv2
import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .bank import EntityBank, EntityRecord, extract_entities, load_bank
from .coco import (
    DatasetBundle,
    ImageRecord,
    InstanceAnnotation,
    annotation_mask,
    load_image,
    save_dataset,
    save_image,
)
from .court import (
    CourtDetector,
    CourtSide,
    DetectionFailure,
    DetectorConfig,
    PlacementBounds,
    PlayableRegion,
    detect_playable_region,
    fallback_bounds,
    infer_court_side,
    sample_anchor,
)
from .errors import DegenerateResult, EmptyBank
from .masks import mask_bbox, overlap_slices, rle_encode
from .validation import check_image, check_probability, check_rng

DEFAULT_RESIZE_SCALES = (
    (3680, 3080),
    (3200, 2400),
    (2680, 2080),
    (2000, 1400),
    (1920, 1440),
    (1800, 1200),
    (1600, 1024),
    (1333, 800),
    (1624, 1234),
    (2336, 1752),
    (2456, 2054),
)

DEFAULT_OUTPUT_SIZE = (1760, 1280)


@dataclass(frozen=True)
class AugmentationConfig:
    paste_probability: float = 0.80
    occluder_probability: float = 0.70
    max_entities: int = 40
    min_visible_fraction: float = 0.10
    scale_range: tuple = (0.8, 1.2)
    rotation_range: tuple = (-15.0, 15.0)
    hflip_probability: float = 0.5
    brightness_delta: float = 0.2
    contrast_delta: float = 0.2
    saturation_delta: float = 0.2
    hue_delta: float = 10.0
    resize_scales: tuple = DEFAULT_RESIZE_SCALES
    output_size: tuple = DEFAULT_OUTPUT_SIZE
    seed: int = 0

    def __post_init__(self):
        check_probability(self.paste_probability, "paste_probability")
        check_probability(self.occluder_probability, "occluder_probability")
        check_probability(self.hflip_probability, "hflip_probability")
        check_probability(self.min_visible_fraction, "min_visible_fraction")
        if self.max_entities < 1:
            raise ValueError(f"max_entities must be >= 1, got {self.max_entities}")
        if not (0 < self.scale_range[0] <= self.scale_range[1]):
            raise ValueError(f"bad scale_range {self.scale_range}")
        if self.rotation_range[0] > self.rotation_range[1]:
            raise ValueError(f"bad rotation_range {self.rotation_range}")
        for d in (self.brightness_delta, self.contrast_delta, self.saturation_delta):
            if not 0 <= d < 1:
                raise ValueError("photometric deltas must lie in [0, 1)")
        if not self.resize_scales:
            raise ValueError("resize_scales must not be empty")
        if any(sw <= 0 or sh <= 0 for sw, sh in self.resize_scales):
            raise ValueError("resize scales must be positive")
        ow, oh = self.output_size
        if ow <= 0 or oh <= 0:
            raise ValueError(f"output_size must be positive, got {self.output_size}")
        if int(self.seed) < 0:
            raise ValueError("seed must be non-negative")


@dataclass(frozen=True)
class JitterParams:
    hflip: bool
    scale: float
    rotation: float
    brightness: float
    contrast: float
    saturation: float
    hue_shift: float

    def is_identity(self) -> bool:
        return (
            not self.hflip
            and self.scale == 1.0
            and self.rotation == 0.0
            and self.brightness == 1.0
            and self.contrast == 1.0
            and self.saturation == 1.0
            and self.hue_shift == 0.0
        )


@dataclass
class PasteRecord:
    bank_index: int
    anchor: tuple
    occluder: bool
    jitter: JitterParams
    annotation_id: int
    visible_pixels: int
    dropped_annotation_ids: list = field(default_factory=list)


@dataclass
class SampleProvenance:
    image_id: int | None
    paste_event: bool
    requested: int
    occluder_draws: list
    pastes: list
    dropped_annotation_ids: list
    skipped_degenerate: int
    chain: dict | None = None


@dataclass
class AugmentedSample:
    image: np.ndarray
    annotations: list
    provenance: SampleProvenance


def draw_jitter(config: AugmentationConfig, rng) -> JitterParams:
    """Draw appearance jitter in the documented order."""
    rng = check_rng(rng)
    return JitterParams(
        hflip=bool(rng.random() < config.hflip_probability),
        scale=float(rng.uniform(config.scale_range[0], config.scale_range[1])),
        rotation=float(rng.uniform(config.rotation_range[0], config.rotation_range[1])),
        brightness=float(rng.uniform(1 - config.brightness_delta, 1 + config.brightness_delta)),
        contrast=float(rng.uniform(1 - config.contrast_delta, 1 + config.contrast_delta)),
        saturation=float(rng.uniform(1 - config.saturation_delta, 1 + config.saturation_delta)),
        hue_shift=float(rng.uniform(-config.hue_delta, config.hue_delta)),
    )


def _photometric(rgb: np.ndarray, brightness, contrast, saturation, hue_shift) -> np.ndarray:
    out = rgb
    if brightness != 1.0 or contrast != 1.0:
        f = out.astype(np.float32)
        if brightness != 1.0:
            f = f * brightness
        if contrast != 1.0:
            mean = float(f.mean())
            f = mean + contrast * (f - mean)
        out = np.clip(f, 0, 255).astype(np.uint8)
    hue_steps = int(round(hue_shift / 2.0))  # HSV hue is degrees / 2 on uint8
    if saturation != 1.0 or hue_steps != 0:
        hsv = cv2.cvtColor(out, cv2.COLOR_RGB2HSV)
        if hue_steps != 0:
            h = hsv[..., 0].astype(np.int16)
            hsv[..., 0] = ((h + hue_steps) % 180).astype(np.uint8)
        if saturation != 1.0:
            s = hsv[..., 1].astype(np.float32) * saturation
            hsv[..., 1] = np.clip(s, 0, 255).astype(np.uint8)
        out = cv2.cvtColor(hsv, cv2.COLOR_HSV2RGB)
    return out


def apply_jitter(entity: EntityRecord, params: JitterParams) -> EntityRecord:
    """Geometric and photometric jitter of a bank entity.

    Identity parameters return the entity pixel-for-pixel. Raises
    DegenerateResult when the transformed mask has no foreground left.
    """
    crop, mask = entity.crop, entity.mask
    if params.hflip:
        crop = np.ascontiguousarray(crop[:, ::-1])
        mask = np.ascontiguousarray(mask[:, ::-1])
    if params.scale != 1.0 or params.rotation != 0.0:
        h, w = mask.shape
        m = cv2.getRotationMatrix2D((w / 2.0, h / 2.0), params.rotation, params.scale)
        cos, sin = abs(m[0, 0]), abs(m[0, 1])
        nw = max(1, math.ceil(w * cos + h * sin))
        nh = max(1, math.ceil(w * sin + h * cos))
        m[0, 2] += nw / 2.0 - w / 2.0
        m[1, 2] += nh / 2.0 - h / 2.0
        crop = cv2.warpAffine(crop, m, (nw, nh), flags=cv2.INTER_LINEAR,
                              borderMode=cv2.BORDER_CONSTANT, borderValue=0)
        mask = cv2.warpAffine(mask.astype(np.uint8), m, (nw, nh),
                              flags=cv2.INTER_NEAREST,
                              borderMode=cv2.BORDER_CONSTANT, borderValue=0).astype(bool)
    crop = _photometric(crop, params.brightness, params.contrast,
                        params.saturation, params.hue_shift)
    box = mask_bbox(mask)
    if box is None:
        raise DegenerateResult(
            f"entity from annotation {entity.source_annotation_id} vanished under jitter"
        )
    x, y, w, h = box
    return EntityRecord(
        source_image_id=entity.source_image_id,
        source_annotation_id=entity.source_annotation_id,
        category_id=entity.category_id,
        crop=np.ascontiguousarray(crop[y : y + h, x : x + w]),
        mask=np.ascontiguousarray(mask[y : y + h, x : x + w]),
        crop_origin=entity.crop_origin,
    )


def jitter_entity(entity: EntityRecord, config: AugmentationConfig, rng) -> EntityRecord:
    return apply_jitter(entity, draw_jitter(config, rng))


def place_occluder(anchor, entity_size, occluder_size, rng) -> tuple:
    """Anchor for an occluder over the top-left quadrant of a pasted entity.

    The occluder center is uniform over [x, x + w/2] x [y, y + h/2] where
    (x, y) is the entity anchor and (w, h) its size; the returned top-left
    corner is the rounded center minus half the occluder size.
    """
    rng = check_rng(rng)
    x, y = anchor
    w, h = entity_size
    ow, oh = occluder_size
    cx = float(rng.uniform(x, x + w / 2.0))
    cy = float(rng.uniform(y, y + h / 2.0))
    return (int(round(cx - ow / 2.0)), int(round(cy - oh / 2.0)))


@dataclass
class _Item:
    ann_id: int
    category_id: int
    origin: tuple
    mask: np.ndarray
    initial: int
    dropped: bool = False


def _subtract_from(items, stamp_mask, stamp_origin, dropped_sink, min_visible_fraction):
    """Remove a freshly pasted stamp from every earlier item's visibility."""
    sx, sy = stamp_origin
    sh, sw = stamp_mask.shape
    for item in items:
        if item.dropped:
            continue
        ix, iy = item.origin
        ih, iw = item.mask.shape
        x0, x1 = max(ix, sx), min(ix + iw, sx + sw)
        y0, y1 = max(iy, sy), min(iy + ih, sy + sh)
        if x0 >= x1 or y0 >= y1:
            continue
        window = stamp_mask[y0 - sy : y1 - sy, x0 - sx : x1 - sx]
        item.mask[y0 - iy : y1 - iy, x0 - ix : x1 - ix] &= ~window
        visible = int(item.mask.sum())
        if visible == 0 or visible < min_visible_fraction * item.initial:
            item.dropped = True
            dropped_sink.append(item.ann_id)


def copy_paste(
    image,
    annotations,
    bank: EntityBank,
    region,
    config: AugmentationConfig = AugmentationConfig(),
    rng=None,
    *,
    id_start: int | None = None,
    image_id: int | None = None,
) -> AugmentedSample:
    """Paste random bank entities into one frame.

    region is a PlayableRegion or PlacementBounds; anchors are sampled from
    it. Every pasted primary gets an occluder coin flip; a heads places a
    second entity with its center in the primary's top-left quadrant, unless
    the per-image entity cap is already reached. Later pastes occlude both
    the original annotations and earlier pastes; annotations whose visible
    share drops below min_visible_fraction of their pre-occlusion pixel
    count are removed and logged.
    """
    image = check_image(image)
    rng = check_rng(rng)
    if len(bank.entries) == 0:
        raise EmptyBank("copy_paste needs a non-empty entity bank")
    height, width = image.shape[:2]
    canvas = image.copy()

    items = []
    initially_dropped = []
    for ann in annotations:
        full = annotation_mask(ann, height, width)
        box = mask_bbox(full)
        if box is None:
            initially_dropped.append(ann.id)
            continue
        x, y, w, h = box
        local = np.ascontiguousarray(full[y : y + h, x : x + w])
        items.append(
            _Item(
                ann_id=ann.id,
                category_id=ann.category_id,
                origin=(x, y),
                mask=local,
                initial=int(local.sum()),
            )
        )

    paste_event = bool(rng.random() < config.paste_probability)
    requested = int(rng.integers(1, config.max_entities + 1)) if paste_event else 0
    next_id = id_start if id_start is not None else max((a.id for a in annotations), default=0) + 1

    total = 0
    skipped = 0
    records = []
    occluder_draws = []

    def paste_one(entity, anchor, occluder_flag, bank_index, params):
        nonlocal next_id, total
        record = PasteRecord(
            bank_index=bank_index,
            anchor=(int(anchor[0]), int(anchor[1])),
            occluder=occluder_flag,
            jitter=params,
            annotation_id=next_id,
            visible_pixels=0,
        )
        next_id += 1
        total += 1
        sl = overlap_slices((height, width), entity.mask.shape, anchor)
        if sl is not None:
            canvas_sl, stamp_sl = sl
            m = entity.mask[stamp_sl]
            visible = int(m.sum())
            if visible:
                canvas[canvas_sl][m] = entity.crop[stamp_sl][m]
                origin = (canvas_sl[1].start, canvas_sl[0].start)
                _subtract_from(items, m, origin, record.dropped_annotation_ids,
                               config.min_visible_fraction)
                items.append(
                    _Item(
                        ann_id=record.annotation_id,
                        category_id=entity.category_id,
                        origin=origin,
                        mask=m.copy(),
                        initial=visible,
                    )
                )
                record.visible_pixels = visible
        if record.visible_pixels == 0:
            # fully clipped: the paste happened but annotates nothing
            record.dropped_annotation_ids.append(record.annotation_id)
        records.append(record)
        return record

    for _ in range(requested):
        if total >= config.max_entities:
            break
        bank_index = int(rng.integers(len(bank.entries)))
        params = draw_jitter(config, rng)
        try:
            entity = apply_jitter(bank.entries[bank_index], params)
        except DegenerateResult:
            skipped += 1
            continue
        anchor = sample_anchor(region, rng)
        paste_one(entity, anchor, False, bank_index, params)
        occluder = bool(rng.random() < config.occluder_probability)
        occluder_draws.append(occluder)
        if occluder and total < config.max_entities:
            occ_index = int(rng.integers(len(bank.entries)))
            occ_params = draw_jitter(config, rng)
            try:
                occ_entity = apply_jitter(bank.entries[occ_index], occ_params)
            except DegenerateResult:
                skipped += 1
                continue
            size = (entity.mask.shape[1], entity.mask.shape[0])
            occ_size = (occ_entity.mask.shape[1], occ_entity.mask.shape[0])
            occ_anchor = place_occluder(anchor, size, occ_size, rng)
            paste_one(occ_entity, occ_anchor, True, occ_index, occ_params)

    out_annotations = []
    for item in items:
        if item.dropped:
            continue
        visible = int(item.mask.sum())
        if visible == 0:
            continue
        full = np.zeros((height, width), dtype=bool)
        x, y = item.origin
        h, w = item.mask.shape
        full[y : y + h, x : x + w] = item.mask
        box = mask_bbox(full)
        out_annotations.append(
            InstanceAnnotation(
                id=item.ann_id,
                image_id=image_id if image_id is not None else 0,
                category_id=item.category_id,
                segmentation=rle_encode(full),
                bbox=tuple(float(v) for v in box),
                area=float(visible),
                iscrowd=0,
            )
        )

    all_dropped = list(initially_dropped)
    for record in records:
        all_dropped.extend(record.dropped_annotation_ids)
    provenance = SampleProvenance(
        image_id=image_id,
        paste_event=paste_event,
        requested=requested,
        occluder_draws=occluder_draws,
        pastes=records,
        dropped_annotation_ids=all_dropped,
        skipped_degenerate=skipped,
    )
    return AugmentedSample(image=canvas, annotations=out_annotations, provenance=provenance)


def base_transform_chain(
    sample: AugmentedSample,
    config: AugmentationConfig = AugmentationConfig(),
    rng=None,
) -> AugmentedSample:
    """Resize to a randomly chosen training scale, jitter colors globally,
    random-crop and zero-pad to config.output_size.

    The resize keeps aspect ratio with factor min(sw/W, sh/H). Annotations
    below min_visible_fraction of their pre-crop pixel count are dropped.
    """
    rng = check_rng(rng)
    image = check_image(sample.image)
    height, width = image.shape[:2]

    pick = int(rng.integers(len(config.resize_scales)))
    sw, sh = config.resize_scales[pick]
    s = min(sw / width, sh / height)
    new_w = max(1, round(width * s))
    new_h = max(1, round(height * s))
    if (new_w, new_h) != (width, height):
        resized = cv2.resize(image, (new_w, new_h), interpolation=cv2.INTER_LINEAR)
    else:
        resized = image.copy()

    entries = []  # (ann, origin, local_mask, pre_crop_count)
    chain_dropped = []
    for ann in sample.annotations:
        full = annotation_mask(ann, height, width)
        box = mask_bbox(full)
        if box is None:
            chain_dropped.append(ann.id)
            continue
        x, y, w, h = box
        local = full[y : y + h, x : x + w]
        if (new_w, new_h) != (width, height):
            lw = max(1, round(w * s))
            lh = max(1, round(h * s))
            local = cv2.resize(local.astype(np.uint8), (lw, lh),
                               interpolation=cv2.INTER_NEAREST).astype(bool)
            x, y = round(x * s), round(y * s)
            # rounding can push the box past the new frame edge
            x, y = min(x, new_w - 1), min(y, new_h - 1)
            local = local[: new_h - y, : new_w - x]
        entries.append((ann, (x, y), local, int(local.sum())))

    brightness = float(rng.uniform(1 - config.brightness_delta, 1 + config.brightness_delta))
    contrast = float(rng.uniform(1 - config.contrast_delta, 1 + config.contrast_delta))
    saturation = float(rng.uniform(1 - config.saturation_delta, 1 + config.saturation_delta))
    hue_shift = float(rng.uniform(-config.hue_delta, config.hue_delta))
    resized = _photometric(resized, brightness, contrast, saturation, hue_shift)

    out_w, out_h = config.output_size
    crop_w, crop_h = min(out_w, new_w), min(out_h, new_h)
    x0 = int(rng.integers(0, new_w - crop_w + 1))
    y0 = int(rng.integers(0, new_h - crop_h + 1))
    cropped = resized[y0 : y0 + crop_h, x0 : x0 + crop_w]

    out = np.zeros((out_h, out_w, 3), dtype=np.uint8)
    out[:crop_h, :crop_w] = cropped

    out_annotations = []
    for ann, (x, y), local, pre_count in entries:
        if pre_count == 0:
            chain_dropped.append(ann.id)
            continue
        lh, lw = local.shape
        ix0, ix1 = max(x, x0), min(x + lw, x0 + crop_w)
        iy0, iy1 = max(y, y0), min(y + lh, y0 + crop_h)
        visible = 0
        if ix0 < ix1 and iy0 < iy1:
            window = local[iy0 - y : iy1 - y, ix0 - x : ix1 - x]
            visible = int(window.sum())
        if visible == 0 or visible < config.min_visible_fraction * pre_count:
            chain_dropped.append(ann.id)
            continue
        full = np.zeros((out_h, out_w), dtype=bool)
        full[iy0 - y0 : iy1 - y0, ix0 - x0 : ix1 - x0] = window
        box = mask_bbox(full)
        out_annotations.append(
            InstanceAnnotation(
                id=ann.id,
                image_id=ann.image_id,
                category_id=ann.category_id,
                segmentation=rle_encode(full),
                bbox=tuple(float(v) for v in box),
                area=float(visible),
                iscrowd=0,
            )
        )

    provenance = dataclasses.replace(
        sample.provenance,
        chain={
            "scale": [int(sw), int(sh)],
            "scale_factor": s,
            "photometric": {
                "brightness": brightness,
                "contrast": contrast,
                "saturation": saturation,
                "hue_shift": hue_shift,
            },
            "crop": [x0, y0],
            "dropped_annotation_ids": chain_dropped,
        },
    )
    return AugmentedSample(image=out, annotations=out_annotations, provenance=provenance)


def resolve_region(image, detector_config: DetectorConfig | None = None, side=None):
    """Detect the playable region, falling back to side-dependent bounds."""
    detected = detect_playable_region(image, detector_config or DetectorConfig())
    if isinstance(detected, DetectionFailure):
        h, w = image.shape[:2]
        side = infer_court_side(detected, w, override=side)
        return fallback_bounds(w, h, side), detected
    return detected, None


def provenance_records(provenance: SampleProvenance) -> list:
    """Flatten one sample's provenance to JSON-ready dicts, one per paste."""
    lines = []
    for rec in provenance.pastes:
        lines.append(
            {
                "image_id": provenance.image_id,
                "bank_index": rec.bank_index,
                "anchor": list(rec.anchor),
                "occluder": rec.occluder,
                "annotation_id": rec.annotation_id,
                "visible_pixels": rec.visible_pixels,
                "jitter": dataclasses.asdict(rec.jitter),
                "dropped_annotation_ids": list(rec.dropped_annotation_ids),
            }
        )
    if provenance.chain and provenance.chain.get("dropped_annotation_ids"):
        lines.append(
            {
                "image_id": provenance.image_id,
                "stage": "crop",
                "dropped_annotation_ids": list(provenance.chain["dropped_annotation_ids"]),
            }
        )
    return lines


def augment_dataset(
    bundle: DatasetBundle,
    bank: EntityBank,
    config: AugmentationConfig,
    out_dir,
    detector_config: DetectorConfig | None = None,
    side_map: dict | None = None,
    apply_chain: bool = True,
    jobs: int = 1,
) -> DatasetBundle:
    """Augment every image of a dataset and write the output tree.

    Produces out_dir/images/*.png, out_dir/annotations.json and
    out_dir/provenance.jsonl. Output bytes are identical for identical
    (bundle, bank, config) regardless of jobs. Pasted annotation ids are
    allocated per image as base + image_index * max_entities with base one
    past the largest source annotation id.
    """
    if len(bank.entries) == 0:
        raise EmptyBank("augment_dataset needs a non-empty entity bank")
    out_dir = Path(out_dir)
    images_dir = out_dir / "images"
    images_dir.mkdir(parents=True, exist_ok=True)
    side_map = side_map or {}

    records = sorted(bundle.images, key=lambda r: r.id)
    base = max((a.id for a in bundle.annotations), default=0) + 1

    def run_one(index_rec):
        index, rec = index_rec
        pixels = (
            load_image(bundle.image_root / rec.file_name)
            if bundle.image_root is not None
            else np.zeros((rec.height, rec.width, 3), dtype=np.uint8)
        )
        region, _failure = resolve_region(pixels, detector_config, side_map.get(rec.id))
        rng = np.random.default_rng([int(config.seed), int(rec.id)])
        sample = copy_paste(
            pixels,
            bundle.annotations_for(rec.id),
            bank,
            region,
            config,
            rng,
            id_start=base + index * config.max_entities,
            image_id=rec.id,
        )
        if apply_chain:
            sample = base_transform_chain(sample, config, rng)
        file_name = Path(rec.file_name).with_suffix(".png").name
        save_image(sample.image, images_dir / file_name)
        out_h, out_w = sample.image.shape[:2]
        new_rec = ImageRecord(id=rec.id, file_name=file_name, width=out_w, height=out_h)
        return new_rec, sample

    indexed = list(enumerate(records))
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(run_one, indexed))
    else:
        results = [run_one(pair) for pair in indexed]

    out_images = []
    out_annotations = []
    lines = []
    for new_rec, sample in results:
        out_images.append(new_rec)
        out_annotations.extend(sample.annotations)
        lines.extend(provenance_records(sample.provenance))

    out_bundle = DatasetBundle(
        images=out_images,
        annotations=out_annotations,
        categories=list(bundle.categories),
        image_root=images_dir,
    )
    save_dataset(out_bundle, out_dir / "annotations.json", recompute=False)
    with open(out_dir / "provenance.jsonl", "w") as fh:
        for line in lines:
            fh.write(json.dumps(line, sort_keys=True) + "\n")
    return out_bundle


class CopyPasteAugmenter(BaseEstimator):
    """sklearn-style front end: fit binds an entity bank, transform augments.

    fit accepts an EntityBank, a DatasetBundle (entities are extracted), or
    a bank directory path. transform takes (image, annotations, image_id)
    triples and returns AugmentedSample objects; randomness is keyed by
    (seed, image_id) so repeated calls replay exactly.
    """

    def __init__(
        self,
        paste_probability=0.80,
        occluder_probability=0.70,
        max_entities=40,
        min_visible_fraction=0.10,
        scale_range=(0.8, 1.2),
        rotation_range=(-15.0, 15.0),
        hflip_probability=0.5,
        brightness_delta=0.2,
        contrast_delta=0.2,
        saturation_delta=0.2,
        hue_delta=10.0,
        resize_scales=DEFAULT_RESIZE_SCALES,
        output_size=DEFAULT_OUTPUT_SIZE,
        seed=0,
        apply_chain=False,
        detector=None,
    ):
        self.paste_probability = paste_probability
        self.occluder_probability = occluder_probability
        self.max_entities = max_entities
        self.min_visible_fraction = min_visible_fraction
        self.scale_range = scale_range
        self.rotation_range = rotation_range
        self.hflip_probability = hflip_probability
        self.brightness_delta = brightness_delta
        self.contrast_delta = contrast_delta
        self.saturation_delta = saturation_delta
        self.hue_delta = hue_delta
        self.resize_scales = resize_scales
        self.output_size = output_size
        self.seed = seed
        self.apply_chain = apply_chain
        self.detector = detector

    def _config(self) -> AugmentationConfig:
        params = self.get_params()
        params.pop("apply_chain")
        params.pop("detector")
        params["scale_range"] = tuple(params["scale_range"])
        params["rotation_range"] = tuple(params["rotation_range"])
        params["resize_scales"] = tuple(tuple(p) for p in params["resize_scales"])
        params["output_size"] = tuple(params["output_size"])
        return AugmentationConfig(**params)

    def fit(self, X, y=None):
        if isinstance(X, EntityBank):
            self.bank_ = X
        elif isinstance(X, DatasetBundle):
            self.bank_ = extract_entities(X)
        else:
            self.bank_ = load_bank(X)
        if len(self.bank_.entries) == 0:
            raise EmptyBank("fitted bank has no entries")
        return self

    def augment_one(self, image, annotations, image_id, region=None) -> AugmentedSample:
        if not hasattr(self, "bank_"):
            raise NotFittedError("call fit with an entity bank first")
        config = self._config()
        if region is None:
            detector = self.detector if self.detector is not None else CourtDetector()
            region, _ = resolve_region(image, detector._config())
        rng = np.random.default_rng([int(config.seed), int(image_id)])
        sample = copy_paste(image, annotations, self.bank_, region, config, rng,
                            image_id=image_id)
        if self.apply_chain:
            sample = base_transform_chain(sample, config, rng)
        return sample

    def transform(self, X):
        return [self.augment_one(image, anns, image_id) for image, anns, image_id in X]
