"""COCO-style instance segmentation dataset IO.

Bundles are kept in canonical id-sorted order. Segmentations are stored
either as COCO polygon lists (flat [x0, y0, ...] rings) or as RleMask.
Compressed RLE strings are accepted on read and converted to uncompressed
counts; they are never written.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import (
    DanglingReference,
    DimensionMismatch,
    IoFailure,
    MalformedAnnotation,
    MissingFile,
)
from .masks import RleMask, mask_bbox, rasterize_polygons, rle_decode


@dataclass
class ImageRecord:
    id: int
    file_name: str
    width: int
    height: int


@dataclass
class Category:
    id: int
    name: str


@dataclass
class InstanceAnnotation:
    id: int
    image_id: int
    category_id: int
    segmentation: object  # list[list[float]] polygons or RleMask
    bbox: tuple
    area: float
    iscrowd: int = 0


@dataclass
class DatasetBundle:
    images: list
    annotations: list
    categories: list
    image_root: Path | None = field(default=None, compare=False)

    def image_by_id(self, image_id: int) -> ImageRecord:
        for rec in self.images:
            if rec.id == image_id:
                return rec
        raise KeyError(f"no image with id {image_id}")

    def annotations_for(self, image_id: int) -> list:
        return [a for a in self.annotations if a.image_id == image_id]

    def sort(self) -> None:
        self.images.sort(key=lambda r: r.id)
        self.annotations.sort(key=lambda a: a.id)
        self.categories.sort(key=lambda c: c.id)


def _decode_compressed_counts(s: str) -> list[int]:
    # LEB128-style packing used by compressed COCO RLE strings, 5 data bits
    # per char offset from '0', with deltas from counts[m - 2] once m > 2
    counts: list[int] = []
    p = 0
    while p < len(s):
        x = 0
        k = 0
        more = True
        while more:
            if p >= len(s):
                raise MalformedAnnotation("truncated compressed RLE string")
            c = ord(s[p]) - 48
            x |= (c & 0x1F) << (5 * k)
            more = bool(c & 0x20)
            p += 1
            k += 1
            if not more and (c & 0x10):
                x |= -1 << (5 * k)
        if len(counts) > 2:
            x += counts[-2]
        counts.append(x)
    return counts


def parse_segmentation(raw, ann_id, height: int, width: int):
    """Normalize a raw COCO segmentation field to polygons or RleMask."""
    if isinstance(raw, dict):
        size = raw.get("size")
        counts = raw.get("counts")
        if (
            not isinstance(size, (list, tuple))
            or len(size) != 2
            or not all(isinstance(v, int) and v >= 0 for v in size)
        ):
            raise MalformedAnnotation(f"annotation {ann_id}: bad RLE size {size!r}")
        if isinstance(counts, str):
            counts = _decode_compressed_counts(counts)
        if not isinstance(counts, list) or not all(
            isinstance(c, int) and c >= 0 for c in counts
        ):
            raise MalformedAnnotation(f"annotation {ann_id}: bad RLE counts")
        if sum(counts) != size[0] * size[1]:
            raise MalformedAnnotation(
                f"annotation {ann_id}: RLE counts sum {sum(counts)} != {size[0] * size[1]}"
            )
        if (size[0], size[1]) != (height, width):
            raise MalformedAnnotation(
                f"annotation {ann_id}: RLE size {tuple(size)} does not match "
                f"image size {(height, width)}"
            )
        return RleMask((size[0], size[1]), tuple(counts))
    if isinstance(raw, list):
        if not raw:
            raise MalformedAnnotation(f"annotation {ann_id}: empty segmentation")
        polygons = []
        for ring in raw:
            if (
                not isinstance(ring, list)
                or len(ring) < 6
                or len(ring) % 2 != 0
                or not all(isinstance(v, (int, float)) for v in ring)
            ):
                raise MalformedAnnotation(f"annotation {ann_id}: bad polygon ring")
            polygons.append([float(v) for v in ring])
        return polygons
    raise MalformedAnnotation(f"annotation {ann_id}: unsupported segmentation type")


def annotation_mask(ann: InstanceAnnotation, height: int, width: int) -> np.ndarray:
    """Decode an annotation's segmentation to a (height, width) boolean mask."""
    seg = ann.segmentation
    if isinstance(seg, RleMask):
        if seg.size != (height, width):
            raise DimensionMismatch(
                f"annotation {ann.id}: RLE size {seg.size} vs image {(height, width)}"
            )
        return rle_decode(seg)
    return rasterize_polygons(seg, height, width)


def _require(cond, message):
    if not cond:
        raise MalformedAnnotation(message)


def validate_bundle(bundle: DatasetBundle) -> None:
    image_ids = set()
    for rec in bundle.images:
        _require(isinstance(rec.id, int) and rec.id >= 0, f"image id {rec.id!r} invalid")
        _require(rec.id not in image_ids, f"duplicate image id {rec.id}")
        _require(rec.width > 0 and rec.height > 0, f"image {rec.id}: non-positive size")
        _require(bool(rec.file_name), f"image {rec.id}: empty file_name")
        image_ids.add(rec.id)
    cat_ids = set()
    for cat in bundle.categories:
        _require(isinstance(cat.id, int), f"category id {cat.id!r} invalid")
        _require(cat.id not in cat_ids, f"duplicate category id {cat.id}")
        cat_ids.add(cat.id)
    ann_ids = set()
    for ann in bundle.annotations:
        _require(isinstance(ann.id, int), f"annotation id {ann.id!r} invalid")
        _require(ann.id not in ann_ids, f"duplicate annotation id {ann.id}")
        ann_ids.add(ann.id)
        if ann.image_id not in image_ids:
            raise DanglingReference(
                f"annotation {ann.id} references missing image {ann.image_id}"
            )
        if ann.category_id not in cat_ids:
            raise DanglingReference(
                f"annotation {ann.id} references missing category {ann.category_id}"
            )
        _require(ann.iscrowd in (0, 1), f"annotation {ann.id}: iscrowd must be 0 or 1")


def load_dataset(annotation_path, image_root=None, verify_images: bool = True) -> DatasetBundle:
    """Parse and validate a COCO-style annotation file.

    When image_root is given and verify_images is True, every referenced
    image file must exist under it.
    """
    annotation_path = Path(annotation_path)
    if not annotation_path.is_file():
        raise MissingFile(str(annotation_path))
    try:
        payload = json.loads(annotation_path.read_text())
    except (OSError, UnicodeDecodeError) as exc:
        raise IoFailure(f"cannot read {annotation_path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise MalformedAnnotation(f"{annotation_path}: invalid JSON: {exc}") from exc
    if not isinstance(payload, dict):
        raise MalformedAnnotation(f"{annotation_path}: top level must be an object")
    for key in ("images", "annotations", "categories"):
        if not isinstance(payload.get(key), list):
            raise MalformedAnnotation(f"{annotation_path}: missing '{key}' list")

    images = []
    for raw in payload["images"]:
        try:
            images.append(
                ImageRecord(
                    id=int(raw["id"]),
                    file_name=str(raw["file_name"]),
                    width=int(raw["width"]),
                    height=int(raw["height"]),
                )
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise MalformedAnnotation(f"bad image record {raw!r}") from exc
    by_id = {rec.id: rec for rec in images}

    categories = []
    for raw in payload["categories"]:
        try:
            categories.append(Category(id=int(raw["id"]), name=str(raw.get("name", ""))))
        except (KeyError, TypeError, ValueError) as exc:
            raise MalformedAnnotation(f"bad category record {raw!r}") from exc

    annotations = []
    for raw in payload["annotations"]:
        try:
            ann_id = int(raw["id"])
            image_id = int(raw["image_id"])
        except (KeyError, TypeError, ValueError) as exc:
            raise MalformedAnnotation(f"bad annotation record {raw!r}") from exc
        rec = by_id.get(image_id)
        if rec is None:
            raise DanglingReference(f"annotation {ann_id} references missing image {image_id}")
        try:
            seg = parse_segmentation(raw["segmentation"], ann_id, rec.height, rec.width)
            bbox = raw.get("bbox", (0.0, 0.0, 0.0, 0.0))
            if not isinstance(bbox, (list, tuple)) or len(bbox) != 4:
                raise MalformedAnnotation(f"annotation {ann_id}: bad bbox {bbox!r}")
            annotations.append(
                InstanceAnnotation(
                    id=ann_id,
                    image_id=image_id,
                    category_id=int(raw["category_id"]),
                    segmentation=seg,
                    bbox=tuple(float(v) for v in bbox),
                    area=float(raw.get("area", 0.0)),
                    iscrowd=int(raw.get("iscrowd", 0)),
                )
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise MalformedAnnotation(f"annotation {ann_id}: {exc}") from exc

    bundle = DatasetBundle(
        images=images,
        annotations=annotations,
        categories=categories,
        image_root=Path(image_root) if image_root is not None else None,
    )
    bundle.sort()
    validate_bundle(bundle)
    if verify_images and bundle.image_root is not None:
        for rec in bundle.images:
            if not (bundle.image_root / rec.file_name).is_file():
                raise MissingFile(str(bundle.image_root / rec.file_name))
    return bundle


def _segmentation_json(seg):
    if isinstance(seg, RleMask):
        return seg.to_json()
    return [list(ring) for ring in seg]


def save_dataset(bundle: DatasetBundle, annotation_path, image_root=None, recompute: bool = True) -> None:
    """Write a bundle as canonical JSON, id-sorted with stable key order.

    With recompute (the default) bbox and area are rebuilt from the decoded
    masks so they can never drift from the segmentation. When image_root is
    given, every referenced image must exist under it.
    """
    validate_bundle(bundle)
    bundle.sort()
    if image_root is not None:
        for rec in bundle.images:
            if not (Path(image_root) / rec.file_name).is_file():
                raise MissingFile(str(Path(image_root) / rec.file_name))
    by_id = {rec.id: rec for rec in bundle.images}
    ann_payload = []
    for ann in bundle.annotations:
        bbox, area = ann.bbox, ann.area
        if recompute:
            rec = by_id[ann.image_id]
            mask = annotation_mask(ann, rec.height, rec.width)
            box = mask_bbox(mask)
            bbox = tuple(float(v) for v in box) if box else (0.0, 0.0, 0.0, 0.0)
            area = float(mask.sum())
        ann_payload.append(
            {
                "id": ann.id,
                "image_id": ann.image_id,
                "category_id": ann.category_id,
                "segmentation": _segmentation_json(ann.segmentation),
                "bbox": list(bbox),
                "area": area,
                "iscrowd": ann.iscrowd,
            }
        )
    payload = {
        "images": [
            {"id": r.id, "file_name": r.file_name, "width": r.width, "height": r.height}
            for r in bundle.images
        ],
        "annotations": ann_payload,
        "categories": [{"id": c.id, "name": c.name} for c in bundle.categories],
    }
    annotation_path = Path(annotation_path)
    try:
        annotation_path.parent.mkdir(parents=True, exist_ok=True)
        annotation_path.write_text(json.dumps(payload, sort_keys=True, indent=None))
    except OSError as exc:
        raise IoFailure(f"cannot write {annotation_path}: {exc}") from exc


def load_image(path) -> np.ndarray:
    """Read an image file as (H, W, 3) uint8 RGB, promoting grayscale."""
    path = Path(path)
    if not path.is_file():
        raise MissingFile(str(path))
    try:
        with Image.open(path) as img:
            return np.asarray(img.convert("RGB"), dtype=np.uint8)
    except OSError as exc:
        raise IoFailure(f"cannot read image {path}: {exc}") from exc


def save_image(image: np.ndarray, path) -> None:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        Image.fromarray(image, mode="RGB").save(path)
    except OSError as exc:
        raise IoFailure(f"cannot write image {path}: {exc}") from exc
