"""Input validation helpers used by the public entry points."""
from __future__ import annotations

import numpy as np

from .errors import DimensionMismatch


def check_image(image) -> np.ndarray:
    """Validate an 8-bit RGB image and return it as a (H, W, 3) uint8 array."""
    arr = np.asarray(image)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ValueError(f"expected an (H, W, 3) RGB array, got shape {arr.shape}")
    if arr.dtype != np.uint8:
        raise ValueError(f"expected uint8 pixels, got {arr.dtype}")
    if arr.shape[0] == 0 or arr.shape[1] == 0:
        raise ValueError("image has a zero-sized dimension")
    return arr


def check_mask(mask) -> np.ndarray:
    """Coerce to a 2-d boolean array without copying when already boolean."""
    arr = np.asarray(mask)
    if arr.ndim != 2:
        raise ValueError(f"expected a 2-d mask, got shape {arr.shape}")
    if arr.dtype != bool:
        arr = arr.astype(bool)
    return arr


def check_same_shape(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise DimensionMismatch(f"mask shapes differ: {a.shape} vs {b.shape}")


def check_rng(rng) -> np.random.Generator:
    """Accept a Generator, or anything np.random.default_rng accepts as a seed."""
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def check_probability(value, name: str) -> float:
    value = float(value)
    if not 0.0 <= value <= 1.0:
        raise ValueError(f"{name} must lie in [0, 1], got {value}")
    return value
