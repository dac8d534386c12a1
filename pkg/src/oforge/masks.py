"""Binary mask primitives: RLE, polygon rasterization, components, compositing.

Masks are plain boolean numpy arrays of shape (height, width). Functions are
pure and never mutate their inputs. Run-length encoding follows the COCO
uncompressed convention: column-major order, first run is background, so a
mask whose top-left pixel is set starts with a zero-length background run.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.ndimage as ndi

from .errors import CountSumMismatch, DegeneratePolygon
from .validation import check_mask, check_same_shape

_STRUCTURES = {
    4: np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool),
    8: np.ones((3, 3), dtype=bool),
}


@dataclass(frozen=True)
class RleMask:
    """Uncompressed run-length encoding of a binary mask.

    size is (height, width); counts alternate background/foreground runs in
    column-major pixel order and always sum to height * width.
    """

    size: tuple[int, int]
    counts: tuple[int, ...]

    def to_json(self) -> dict:
        return {"size": [int(self.size[0]), int(self.size[1])], "counts": list(self.counts)}


@dataclass(frozen=True)
class ComponentSet:
    """Connected components of a mask.

    labels holds 0 for background and 1..count for foreground components,
    numbered by first encounter in row-major scan order. component_sizes[i]
    is the pixel count of label i + 1.
    """

    labels: np.ndarray
    count: int
    component_sizes: tuple[int, ...]


def rle_encode(mask) -> RleMask:
    mask = check_mask(mask)
    h, w = mask.shape
    flat = mask.flatten(order="F")
    if flat.size == 0:
        return RleMask((h, w), ())
    change = np.flatnonzero(flat[1:] != flat[:-1]) + 1
    bounds = np.concatenate(([0], change, [flat.size]))
    counts = np.diff(bounds)
    if flat[0]:
        counts = np.concatenate(([0], counts))
    return RleMask((h, w), tuple(int(c) for c in counts))


def rle_decode(rle: RleMask) -> np.ndarray:
    h, w = rle.size
    counts = np.asarray(rle.counts, dtype=np.int64)
    if counts.size and int(counts.min()) < 0:
        raise CountSumMismatch("negative run length")
    total = int(counts.sum()) if counts.size else 0
    if total != h * w:
        raise CountSumMismatch(f"counts sum to {total}, expected {h * w} for size {rle.size}")
    values = np.zeros(counts.size, dtype=bool)
    values[1::2] = True
    flat = np.repeat(values, counts)
    return np.ascontiguousarray(flat.reshape((h, w), order="F"))


def rasterize_polygons(polygons, height: int, width: int) -> np.ndarray:
    """Fill polygons into a (height, width) mask, union over all polygons.

    A pixel (r, c) is set iff its center (c + 0.5, r + 0.5) is inside the
    polygon under the even-odd rule. Edges are treated half-open in y, so a
    vertex lying exactly on a scanline is counted once. Vertices may fall
    outside the raster; the fill is clipped.

    Each polygon is a flat [x0, y0, x1, y1, ...] list or an (N, 2) array and
    needs at least three vertices, otherwise DegeneratePolygon is raised.
    """
    if height < 0 or width < 0:
        raise ValueError("raster dimensions must be non-negative")
    out = np.zeros((height, width), dtype=bool)
    for poly in polygons:
        pts = np.asarray(poly, dtype=np.float64).reshape(-1, 2)
        if pts.shape[0] < 3:
            raise DegeneratePolygon(f"polygon needs at least 3 vertices, got {pts.shape[0]}")
        if height and width:
            out |= _fill_polygon(pts, height, width)
    return out


def _fill_polygon(pts: np.ndarray, height: int, width: int) -> np.ndarray:
    x1, y1 = pts[:, 0], pts[:, 1]
    x2, y2 = np.roll(x1, -1), np.roll(y1, -1)
    keep = y1 != y2  # horizontal edges never cross a scanline center
    x1, y1, x2, y2 = x1[keep], y1[keep], x2[keep], y2[keep]
    mask = np.zeros((height, width), dtype=bool)
    if x1.size == 0:
        return mask
    ylo = np.minimum(y1, y2)
    yhi = np.maximum(y1, y2)
    yc = np.arange(height, dtype=np.float64) + 0.5
    crosses = (ylo[None, :] <= yc[:, None]) & (yc[:, None] < yhi[None, :])
    with np.errstate(divide="ignore", invalid="ignore"):
        t = (yc[:, None] - y1[None, :]) / (y2 - y1)[None, :]
        xs = x1[None, :] + t * (x2 - x1)[None, :]
    xs = np.where(crosses, xs, np.inf)
    xs.sort(axis=1)
    n_cross = crosses.sum(axis=1)
    delta = np.zeros((height, width + 1), dtype=np.int32)
    rows = np.arange(height)
    for k in range(0, xs.shape[1] - 1, 2):
        # even crossing counts guarantee xs[:, k + 1] is finite where valid
        valid = n_cross > k
        if not valid.any():
            break
        lo = np.ceil(xs[valid, k] - 0.5).astype(np.int64)
        hi = np.ceil(xs[valid, k + 1] - 0.5).astype(np.int64)
        lo = np.clip(lo, 0, width)
        hi = np.clip(hi, 0, width)
        r = rows[valid]
        np.add.at(delta, (r, lo), 1)
        np.add.at(delta, (r, hi), -1)
    mask = np.cumsum(delta[:, :-1], axis=1) > 0
    return mask


def connected_components(mask, connectivity: int = 4) -> ComponentSet:
    mask = check_mask(mask)
    if connectivity not in _STRUCTURES:
        raise ValueError(f"connectivity must be 4 or 8, got {connectivity}")
    raw, n = ndi.label(mask, structure=_STRUCTURES[connectivity])
    if n == 0:
        return ComponentSet(raw.astype(np.int32), 0, ())
    # renumber to first-encounter order in row-major scan so labeling is a
    # stable contract rather than an implementation detail of the backend
    values, first = np.unique(raw.ravel(), return_index=True)
    keep = values != 0
    values, first = values[keep], first[keep]
    order = np.argsort(first, kind="stable")
    remap = np.zeros(n + 1, dtype=np.int32)
    remap[values[order]] = np.arange(1, n + 1, dtype=np.int32)
    labels = remap[raw]
    sizes = np.bincount(labels.ravel(), minlength=n + 1)[1:]
    return ComponentSet(labels, int(n), tuple(int(s) for s in sizes))


def mask_iou(a, b) -> float:
    a = check_mask(a)
    b = check_mask(b)
    check_same_shape(a, b)
    inter = int(np.logical_and(a, b).sum())
    union = int(a.sum()) + int(b.sum()) - inter
    return inter / union if union else 0.0


def subtract(base, overlay) -> np.ndarray:
    """Pixels of base not covered by overlay."""
    base = check_mask(base)
    overlay = check_mask(overlay)
    check_same_shape(base, overlay)
    return base & ~overlay


def overlap_slices(canvas_shape, stamp_shape, offset):
    """Clip a stamp placed at offset (x, y) against a canvas.

    Returns (canvas_slice, stamp_slice) addressing the overlapping window in
    each array, or None when the stamp lands entirely outside.
    """
    ch, cw = canvas_shape[:2]
    sh, sw = stamp_shape[:2]
    x, y = offset
    cy0, cx0 = max(y, 0), max(x, 0)
    cy1, cx1 = min(y + sh, ch), min(x + sw, cw)
    if cy0 >= cy1 or cx0 >= cx1:
        return None
    sy0, sx0 = cy0 - y, cx0 - x
    canvas_sl = (slice(cy0, cy1), slice(cx0, cx1))
    stamp_sl = (slice(sy0, sy0 + (cy1 - cy0)), slice(sx0, sx0 + (cx1 - cx0)))
    return canvas_sl, stamp_sl


def paste_mask(canvas, stamp, offset) -> np.ndarray:
    """Union a stamp into a copy of canvas at offset (x, y), clipping at edges."""
    canvas = check_mask(canvas)
    stamp = check_mask(stamp)
    out = canvas.copy()
    sl = overlap_slices(canvas.shape, stamp.shape, offset)
    if sl is not None:
        out[sl[0]] |= stamp[sl[1]]
    return out


def mask_bbox(mask):
    """Tight (x, y, w, h) box of the foreground, or None for an empty mask."""
    mask = check_mask(mask)
    rows = np.flatnonzero(mask.any(axis=1))
    if rows.size == 0:
        return None
    cols = np.flatnonzero(mask.any(axis=0))
    return (int(cols[0]), int(rows[0]), int(cols[-1] - cols[0] + 1), int(rows[-1] - rows[0] + 1))
