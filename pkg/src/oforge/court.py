"""Playable-area estimation for broadcast basketball frames.

The detector runs a classical pipeline: dominant-hue color mask over the
frame center, morphological closing, largest contour, Hough-line support
check, convex hull with corner snapping. Any stage can give up, in which
case a DetectionFailure value (not an exception) reports where, and callers
fall back to the side-dependent placement bounds.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import cv2
import numpy as np
from sklearn.base import BaseEstimator

from .errors import EmptyRegion, InvalidDimensions
from .masks import rasterize_polygons
from .validation import check_image, check_rng


class CourtSide(Enum):
    LEFT = "left"
    RIGHT = "right"
    UNKNOWN = "unknown"


@dataclass(frozen=True)
class ColorBand:
    """Hue band on the OpenCV 0..179 wheel plus saturation/value floors."""

    hue_center: int
    hue_tolerance: int
    sat_floor: int
    val_floor: int
    reliable: bool


@dataclass(frozen=True)
class PlacementBounds:
    """Inclusive integer ranges for paste anchors."""

    x_lo: int
    x_hi: int
    y_lo: int
    y_hi: int


@dataclass(frozen=True)
class PlayableRegion:
    polygon: tuple
    confidence: float
    interior_mask: np.ndarray


@dataclass(frozen=True)
class DetectionFailure:
    stage: str  # "contour" | "hough" | "area"
    detail: str = ""


@dataclass(frozen=True)
class DetectorConfig:
    hue_tolerance: int = 12
    saturation_floor: int = 40
    value_floor: int = 40
    morph_kernel: int = 9
    hough_threshold_fraction: float = 0.3
    min_boundary_lines: int = 2
    region_min_fraction: float = 0.20


def dominant_court_color(image, config: DetectorConfig = DetectorConfig()) -> ColorBand:
    """Modal hue of the central third of the frame.

    The histogram is taken over pixels clearing the saturation/value floors;
    when almost none do (washed-out or grayscale frames) the band is built
    from all center pixels and flagged unreliable.
    """
    image = check_image(image)
    h, w = image.shape[:2]
    y0, y1 = h // 3, max(h // 3 * 2, h // 3 + 1)
    x0, x1 = w // 3, max(w // 3 * 2, w // 3 + 1)
    center = image[y0:y1, x0:x1]
    hsv = cv2.cvtColor(center, cv2.COLOR_RGB2HSV)
    hue = hsv[..., 0].ravel()
    strong = (hsv[..., 1].ravel() >= config.saturation_floor) & (
        hsv[..., 2].ravel() >= config.value_floor
    )
    reliable = bool(strong.mean() >= 0.02) if strong.size else False
    sample = hue[strong] if reliable else hue
    hist = np.bincount(sample, minlength=180)
    return ColorBand(
        hue_center=int(hist.argmax()),
        hue_tolerance=int(config.hue_tolerance),
        sat_floor=int(config.saturation_floor),
        val_floor=int(config.value_floor),
        reliable=reliable,
    )


def _band_mask(hsv: np.ndarray, band: ColorBand) -> np.ndarray:
    dist = (hsv[..., 0].astype(np.int16) - band.hue_center) % 180
    dist = np.minimum(dist, 180 - dist)
    hit = (
        (dist <= band.hue_tolerance)
        & (hsv[..., 1] >= band.sat_floor)
        & (hsv[..., 2] >= band.val_floor)
    )
    return hit.astype(np.uint8) * 255


def _line_intersection(rho1, theta1, rho2, theta2):
    a = np.array(
        [[math.cos(theta1), math.sin(theta1)], [math.cos(theta2), math.sin(theta2)]]
    )
    det = a[0, 0] * a[1, 1] - a[0, 1] * a[1, 0]
    if abs(det) < 1e-9:
        return None
    x = (rho1 * a[1, 1] - rho2 * a[0, 1]) / det
    y = (rho2 * a[0, 0] - rho1 * a[1, 0]) / det
    return (x, y)


def _refine_corners(poly: np.ndarray, lines: np.ndarray, max_shift: float) -> np.ndarray:
    """Snap hull vertices to nearby intersections of the supporting lines."""
    pts = [(float(r), float(t)) for r, t in lines[:12, 0]]
    inters = []
    for i in range(len(pts)):
        for j in range(i + 1, len(pts)):
            p = _line_intersection(*pts[i], *pts[j])
            if p is not None:
                inters.append(p)
    if not inters:
        return poly
    inters = np.asarray(inters)
    out = poly.astype(np.float64).copy()
    for k, (vx, vy) in enumerate(out):
        d = np.hypot(inters[:, 0] - vx, inters[:, 1] - vy)
        best = int(d.argmin())
        if d[best] <= max_shift:
            out[k] = inters[best]
    return out


def detect_playable_region(image, config: DetectorConfig = DetectorConfig()):
    """Estimate the court region; returns PlayableRegion or DetectionFailure."""
    image = check_image(image)
    h, w = image.shape[:2]
    band = dominant_court_color(image, config)
    hsv = cv2.cvtColor(image, cv2.COLOR_RGB2HSV)
    raw = _band_mask(hsv, band)
    kernel = np.ones((config.morph_kernel, config.morph_kernel), dtype=np.uint8)
    closed = cv2.morphologyEx(raw, cv2.MORPH_CLOSE, kernel)

    contours, _ = cv2.findContours(closed, cv2.RETR_EXTERNAL, cv2.CHAIN_APPROX_SIMPLE)
    contours = [c for c in contours if cv2.contourArea(c) > 0]
    if not contours:
        return DetectionFailure("contour", "no candidate court region in color mask")
    largest = max(contours, key=cv2.contourArea)

    edges = cv2.Canny(closed, 50, 150)
    threshold = max(int(config.hough_threshold_fraction * math.hypot(w, h)), 1)
    lines = cv2.HoughLines(edges, 1, np.pi / 180.0, threshold)
    found = 0 if lines is None else len(lines)
    if found < config.min_boundary_lines:
        return DetectionFailure(
            "hough", f"{found} supporting boundary lines, need {config.min_boundary_lines}"
        )

    hull = cv2.convexHull(largest)
    eps = 0.01 * cv2.arcLength(hull, True)
    poly = cv2.approxPolyDP(hull, eps, True).reshape(-1, 2).astype(np.float64)
    if poly.shape[0] < 3:
        return DetectionFailure("contour", "candidate region degenerates to a line")
    poly = _refine_corners(poly, lines, max_shift=2.0 * config.morph_kernel)

    interior = rasterize_polygons([poly], h, w)
    area = int(interior.sum())
    if area < config.region_min_fraction * h * w:
        return DetectionFailure(
            "area",
            f"court candidate covers {area / (h * w):.3f} of the frame, "
            f"need {config.region_min_fraction:.2f}",
        )
    inside = int(np.logical_and(interior, closed > 0).sum())
    confidence = inside / area
    polygon = tuple((float(x), float(y)) for x, y in poly)
    return PlayableRegion(polygon=polygon, confidence=float(confidence), interior_mask=interior)


def fallback_bounds(width: int, height: int, side: CourtSide = CourtSide.UNKNOWN) -> PlacementBounds:
    """Side-dependent anchor bounds used when detection fails.

    Left court: w/5 <= x <= w. Right court: 0 <= x <= w - w/5. Unknown side
    intersects both. Vertically h/2 - h/5 <= y <= h/2 + h/5 for every side.
    Bounds are the integers inside the real-valued intervals.
    """
    if width <= 0 or height <= 0:
        raise InvalidDimensions(f"need positive image size, got {width}x{height}")
    if side == CourtSide.LEFT:
        x_lo, x_hi = -(-width // 5), width
    elif side == CourtSide.RIGHT:
        x_lo, x_hi = 0, (4 * width) // 5
    else:
        x_lo, x_hi = -(-width // 5), (4 * width) // 5
    y_lo, y_hi = -(-3 * height // 10), (7 * height) // 10
    if x_lo > x_hi or y_lo > y_hi:
        raise InvalidDimensions(
            f"empty anchor range for {width}x{height} side={side.value}"
        )
    return PlacementBounds(x_lo=x_lo, x_hi=x_hi, y_lo=y_lo, y_hi=y_hi)


def infer_court_side(region, image_width: int, override: CourtSide | None = None) -> CourtSide:
    """Which half the court occupies, from the region centroid.

    A detection failure (or None) yields the override when given, else
    UNKNOWN. Centroids exactly on the vertical midline count as RIGHT.
    """
    if override is not None:
        return override
    if region is None or isinstance(region, DetectionFailure):
        return CourtSide.UNKNOWN
    cols = np.flatnonzero(region.interior_mask.any(axis=0))
    if cols.size == 0:
        return CourtSide.UNKNOWN
    weights = region.interior_mask.sum(axis=0)[cols]
    cx = float(np.average(cols + 0.5, weights=weights))
    return CourtSide.LEFT if cx < image_width / 2.0 else CourtSide.RIGHT


def sample_anchor(region, rng) -> tuple:
    """Uniform anchor from a PlayableRegion interior or PlacementBounds box."""
    rng = check_rng(rng)
    if isinstance(region, PlacementBounds):
        x = int(rng.integers(region.x_lo, region.x_hi + 1))
        y = int(rng.integers(region.y_lo, region.y_hi + 1))
        return (x, y)
    if isinstance(region, PlayableRegion):
        flat = np.flatnonzero(region.interior_mask.ravel())
        if flat.size == 0:
            raise EmptyRegion("playable region has no interior pixels")
        pick = int(flat[int(rng.integers(flat.size))])
        w = region.interior_mask.shape[1]
        return (pick % w, pick // w)
    raise TypeError(f"cannot sample from {type(region).__name__}")


class CourtDetector(BaseEstimator):
    """Estimator wrapper around detect_playable_region.

    fit is a no-op kept for pipeline compatibility; predict maps one image
    or a sequence of images to PlayableRegion / DetectionFailure values.
    """

    def __init__(
        self,
        hue_tolerance=12,
        saturation_floor=40,
        value_floor=40,
        morph_kernel=9,
        hough_threshold_fraction=0.3,
        min_boundary_lines=2,
        region_min_fraction=0.20,
    ):
        self.hue_tolerance = hue_tolerance
        self.saturation_floor = saturation_floor
        self.value_floor = value_floor
        self.morph_kernel = morph_kernel
        self.hough_threshold_fraction = hough_threshold_fraction
        self.min_boundary_lines = min_boundary_lines
        self.region_min_fraction = region_min_fraction

    def _config(self) -> DetectorConfig:
        return DetectorConfig(**self.get_params())

    def fit(self, X=None, y=None):
        return self

    def detect(self, image):
        return detect_playable_region(image, self._config())

    def predict(self, X):
        if isinstance(X, np.ndarray) and X.ndim == 3:
            return self.detect(X)
        return [self.detect(img) for img in X]
