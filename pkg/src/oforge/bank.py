"""Extraction and persistence of paste-source entities.

A bank entry keeps the tight RGB crop of one instance, its boolean mask and
where it came from. On disk a bank is a directory:

    manifest.json
    crops/<index>.png   lossless RGB
    masks/<index>.png   1-bit PNG
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .coco import DatasetBundle, annotation_mask, load_image
from .errors import CorruptBank, EmptyBank, IoFailure
from .masks import mask_bbox
from .validation import check_rng

_MANIFEST_NAME = "manifest.json"


@dataclass(eq=False)
class EntityRecord:
    source_image_id: int
    source_annotation_id: int
    category_id: int
    crop: np.ndarray
    mask: np.ndarray
    crop_origin: tuple

    def __eq__(self, other):
        if not isinstance(other, EntityRecord):
            return NotImplemented
        return (
            self.source_image_id == other.source_image_id
            and self.source_annotation_id == other.source_annotation_id
            and self.category_id == other.category_id
            and tuple(self.crop_origin) == tuple(other.crop_origin)
            and np.array_equal(self.crop, other.crop)
            and np.array_equal(self.mask, other.mask)
        )


@dataclass(eq=False)
class EntityBank:
    entries: list
    skip_report: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.entries)

    def __eq__(self, other):
        # skip_report is extraction metadata and not persisted, so equality
        # is defined over entries only
        if not isinstance(other, EntityBank):
            return NotImplemented
        return self.entries == other.entries


def extract_entities(bundle: DatasetBundle, images=None) -> EntityBank:
    """Cut every usable instance out of its source image.

    images may map image_id to a preloaded (H, W, 3) array; otherwise pixels
    are read from bundle.image_root. Crowd annotations and annotations whose
    mask decodes empty are skipped and tallied in skip_report.
    """
    entries = []
    skipped = {"crowd": 0, "empty": 0}
    for rec in sorted(bundle.images, key=lambda r: r.id):
        pixels = None
        for ann in sorted(bundle.annotations_for(rec.id), key=lambda a: a.id):
            if ann.iscrowd:
                skipped["crowd"] += 1
                continue
            mask = annotation_mask(ann, rec.height, rec.width)
            box = mask_bbox(mask)
            if box is None:
                skipped["empty"] += 1
                continue
            if pixels is None:
                if images is not None and rec.id in images:
                    pixels = np.asarray(images[rec.id])
                elif bundle.image_root is not None:
                    pixels = load_image(bundle.image_root / rec.file_name)
                else:
                    raise ValueError(
                        f"no pixels for image {rec.id}: pass images= or set image_root"
                    )
            x, y, w, h = box
            entries.append(
                EntityRecord(
                    source_image_id=rec.id,
                    source_annotation_id=ann.id,
                    category_id=ann.category_id,
                    crop=np.ascontiguousarray(pixels[y : y + h, x : x + w]),
                    mask=np.ascontiguousarray(mask[y : y + h, x : x + w]),
                    crop_origin=(x, y),
                )
            )
    return EntityBank(entries=entries, skip_report=skipped)


def save_bank(bank: EntityBank, root) -> None:
    root = Path(root)
    try:
        (root / "crops").mkdir(parents=True, exist_ok=True)
        (root / "masks").mkdir(parents=True, exist_ok=True)
        manifest = []
        for idx, rec in enumerate(bank.entries):
            Image.fromarray(rec.crop, mode="RGB").save(root / "crops" / f"{idx}.png")
            bits = Image.fromarray(rec.mask.astype(np.uint8) * 255).convert("1")
            bits.save(root / "masks" / f"{idx}.png")
            manifest.append(
                {
                    "index": idx,
                    "source_image_id": rec.source_image_id,
                    "source_annotation_id": rec.source_annotation_id,
                    "category_id": rec.category_id,
                    "crop_origin": list(rec.crop_origin),
                    "height": int(rec.mask.shape[0]),
                    "width": int(rec.mask.shape[1]),
                }
            )
        (root / _MANIFEST_NAME).write_text(json.dumps(manifest, sort_keys=True, indent=1))
    except OSError as exc:
        raise IoFailure(f"cannot write bank at {root}: {exc}") from exc


def load_bank(root) -> EntityBank:
    root = Path(root)
    manifest_path = root / _MANIFEST_NAME
    if not manifest_path.is_file():
        raise CorruptBank(f"missing {_MANIFEST_NAME} under {root}")
    try:
        manifest = json.loads(manifest_path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise CorruptBank(f"unreadable manifest: {exc}") from exc
    if not isinstance(manifest, list):
        raise CorruptBank("manifest must be a list")
    entries = []
    for pos, item in enumerate(manifest):
        try:
            idx = int(item["index"])
            h, w = int(item["height"]), int(item["width"])
            origin = tuple(int(v) for v in item["crop_origin"])
        except (KeyError, TypeError, ValueError) as exc:
            raise CorruptBank(f"bad manifest entry at position {pos}: {exc}") from exc
        if idx != pos:
            raise CorruptBank(f"manifest entry {pos} has index {idx}")
        crop_path = root / "crops" / f"{idx}.png"
        mask_path = root / "masks" / f"{idx}.png"
        for p in (crop_path, mask_path):
            if not p.is_file():
                raise CorruptBank(f"manifest names missing file {p}")
        try:
            with Image.open(crop_path) as img:
                crop = np.asarray(img.convert("RGB"), dtype=np.uint8)
            with Image.open(mask_path) as img:
                mask = np.asarray(img.convert("1"), dtype=bool)
        except OSError as exc:
            raise CorruptBank(f"unreadable entry {idx}: {exc}") from exc
        if crop.shape[:2] != (h, w) or mask.shape != (h, w):
            raise CorruptBank(
                f"entry {idx}: stored size {crop.shape[:2]}/{mask.shape} "
                f"does not match manifest {(h, w)}"
            )
        entries.append(
            EntityRecord(
                source_image_id=int(item["source_image_id"]),
                source_annotation_id=int(item["source_annotation_id"]),
                category_id=int(item["category_id"]),
                crop=crop,
                mask=mask,
                crop_origin=origin,
            )
        )
    return EntityBank(entries=entries)


def sample_entities(bank: EntityBank, count: int, rng) -> list:
    """Draw count entries uniformly with replacement."""
    if count < 0:
        raise ValueError(f"count must be non-negative, got {count}")
    if count == 0:
        return []
    if len(bank.entries) == 0:
        raise EmptyBank("cannot sample from an empty bank")
    rng = check_rng(rng)
    picks = rng.integers(0, len(bank.entries), size=count)
    return [bank.entries[int(i)] for i in picks]
