"""Input validation helpers, in the spirit of ``sklearn.utils.validation``."""
from __future__ import annotations

import numpy as np

from .exceptions import DimensionMismatch, InvalidArgument


def check_rgb(pixels, name="frame") -> np.ndarray:
    """Return ``pixels`` as a C-contiguous ``(H, W, 3)`` uint8 array."""
    arr = np.asarray(pixels)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise InvalidArgument(f"{name}: expected an (H, W, 3) array, got shape {arr.shape}")
    if arr.shape[0] == 0 or arr.shape[1] == 0:
        raise InvalidArgument(f"{name}: empty raster")
    if arr.dtype != np.uint8:
        if not np.issubdtype(arr.dtype, np.integer) or arr.min() < 0 or arr.max() > 255:
            raise InvalidArgument(f"{name}: pixel values must be 8-bit integers")
        arr = arr.astype(np.uint8)
    return np.ascontiguousarray(arr)


def check_mask(mask, name="mask") -> np.ndarray:
    arr = np.asarray(mask)
    if arr.ndim != 2:
        raise InvalidArgument(f"{name}: expected a 2-D array, got shape {arr.shape}")
    return arr.astype(bool, copy=False)


def check_gray(gray, name="gray") -> np.ndarray:
    arr = np.asarray(gray)
    if arr.ndim != 2:
        raise InvalidArgument(f"{name}: expected a 2-D array, got shape {arr.shape}")
    if arr.dtype != np.uint8:
        arr = np.clip(arr, 0, 255).astype(np.uint8)
    return arr


def check_same_shape(a: np.ndarray, b: np.ndarray, what="inputs") -> None:
    if a.shape[:2] != b.shape[:2]:
        raise DimensionMismatch(f"{what}: {a.shape[1]}x{a.shape[0]} vs {b.shape[1]}x{b.shape[0]}")


def check_positive_int(value, name, minimum=1) -> int:
    if isinstance(value, bool) or int(value) != value or value < minimum:
        raise InvalidArgument(f"{name} must be an integer >= {minimum}, got {value!r}")
    return int(value)


def check_in_open_interval(value, name, low=0.0, high=1.0) -> float:
    value = float(value)
    if not low < value < high:
        raise InvalidArgument(f"{name} must lie in ({low}, {high}), got {value}")
    return value


def round_half_away(x) -> np.ndarray:
    """Round to nearest, halves away from zero (``np.round`` rounds half to even)."""
    x = np.asarray(x, dtype=np.float64)
    return np.sign(x) * np.floor(np.abs(x) + 0.5)
