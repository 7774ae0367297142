"""Frame-vs-background segmentation: difference, Otsu threshold, morphology, blob extraction.

Binary masks are 2-D bool arrays and gray images 2-D uint8 arrays, both row-major.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage
from sklearn.base import BaseEstimator, TransformerMixin

from .exceptions import EmptyHistogram, InvalidArgument
from .frame_io import Frame
from .validation import check_gray, check_mask, check_rgb, check_same_shape


def _pixels(frame) -> np.ndarray:
    return frame.pixels if isinstance(frame, Frame) else check_rgb(frame)


def diff_magnitude(frame, background) -> np.ndarray:
    """Mean absolute channel difference, rounded half away from zero."""
    a, b = _pixels(frame), _pixels(background)
    check_same_shape(a, b, "frame vs background")
    total = np.abs(a.astype(np.int16) - b.astype(np.int16)).sum(axis=2, dtype=np.int32)
    return np.minimum((2 * total + 3) // 6, 255).astype(np.uint8)


def histogram256(gray) -> np.ndarray:
    return np.bincount(check_gray(gray).ravel(), minlength=256).astype(np.int64)


def otsu_threshold(hist) -> int:
    """Level ``t`` maximising between-class variance, class 0 being values below ``t``.

    Scores are compared as exact integer fractions so the smallest maximiser wins ties
    deterministically. A histogram with a single occupied bin returns that bin + 1.
    """
    counts = [int(c) for c in np.asarray(hist).ravel()]
    if len(counts) != 256 or min(counts) < 0:
        raise InvalidArgument("histogram must have 256 non-negative bins")
    n = sum(counts)
    if n == 0:
        raise EmptyHistogram("histogram is empty")
    occupied = [i for i, c in enumerate(counts) if c]
    if len(occupied) == 1:
        return occupied[0] + 1

    s = sum(i * c for i, c in enumerate(counts))
    best_t, best_num, best_den = 0, 0, 1
    n0 = s0 = 0
    for t in range(1, 256):
        n0 += counts[t - 1]
        s0 += (t - 1) * counts[t - 1]
        n1 = n - n0
        if n0 == 0 or n1 == 0:
            continue
        # w0 * w1 * (mu0 - mu1)^2 == (n1*s0 - n0*s1)^2 / (n^2 * n0 * n1)
        num = (n1 * s0 - n0 * (s - s0)) ** 2
        den = n0 * n1
        if num * best_den > best_num * den:
            best_t, best_num, best_den = t, num, den
    return best_t


def apply_threshold(gray, t: int) -> np.ndarray:
    t = min(max(int(t), 0), 255)
    return check_gray(gray) >= t


def _square(radius: int) -> np.ndarray:
    if isinstance(radius, bool) or int(radius) != radius or radius < 1:
        raise InvalidArgument(f"morphology radius must be an integer >= 1, got {radius!r}")
    return np.ones((2 * int(radius) + 1,) * 2, dtype=bool)


def erode(mask, radius: int) -> np.ndarray:
    return ndimage.binary_erosion(check_mask(mask), _square(radius), border_value=0)


def dilate(mask, radius: int) -> np.ndarray:
    return ndimage.binary_dilation(check_mask(mask), _square(radius), border_value=0)


def morphology(mask, op: str, radius: int) -> np.ndarray:
    """Square-element erode/dilate/open/close; pixels outside the raster count as background."""
    if op == "erode":
        return erode(mask, radius)
    if op == "dilate":
        return dilate(mask, radius)
    if op == "open":
        return dilate(erode(mask, radius), radius)
    if op == "close":
        return erode(dilate(mask, radius), radius)
    raise InvalidArgument(f"unknown morphology op {op!r}")


@dataclass(frozen=True)
class Component:
    label: int
    area: int
    bbox: tuple[int, int, int, int]  # min_x, min_y, max_x, max_y


def label_components(mask, connectivity: int = 8) -> tuple[np.ndarray, list[Component]]:
    """Label connected components, numbered 1.. in order of decreasing area.

    Equal areas are ordered by bounding-box top-left corner (row first, then column),
    then by the first pixel met in raster order.
    """
    mask = check_mask(mask)
    if connectivity == 8:
        structure = np.ones((3, 3), dtype=bool)
    elif connectivity == 4:
        structure = ndimage.generate_binary_structure(2, 1)
    else:
        raise InvalidArgument("connectivity must be 4 or 8")
    raw, n = ndimage.label(mask, structure=structure)
    if n == 0:
        return np.zeros(mask.shape, dtype=np.int32), []

    flat = raw.ravel()
    idx = np.flatnonzero(flat)
    lab = flat[idx]
    ys, xs = np.divmod(idx, mask.shape[1])
    area = np.bincount(lab, minlength=n + 1)[1:]
    min_x = np.full(n + 1, np.iinfo(np.int64).max)
    min_y = min_x.copy()
    first = min_x.copy()
    max_x = np.full(n + 1, -1)
    max_y = max_x.copy()
    np.minimum.at(min_x, lab, xs)
    np.minimum.at(min_y, lab, ys)
    np.minimum.at(first, lab, idx)
    np.maximum.at(max_x, lab, xs)
    np.maximum.at(max_y, lab, ys)

    order = sorted(range(1, n + 1), key=lambda i: (-area[i - 1], min_y[i], min_x[i], first[i]))
    relabel = np.zeros(n + 1, dtype=np.int32)
    comps = []
    for new, old in enumerate(order, start=1):
        relabel[old] = new
        comps.append(Component(new, int(area[old - 1]), (int(min_x[old]), int(min_y[old]), int(max_x[old]), int(max_y[old]))))
    return relabel[raw], comps


def connected_components(mask, connectivity: int = 8) -> list[Component]:
    return label_components(mask, connectivity)[1]


def largest_blob(mask, min_area: int = 1) -> np.ndarray | None:
    """Mask of the largest component, or None when it is smaller than ``min_area``."""
    labels, comps = label_components(mask)
    if not comps or comps[0].area < min_area:
        return None
    return labels == 1


@dataclass
class Segmentation:
    gray: np.ndarray
    threshold: int
    raw: np.ndarray
    cleaned: np.ndarray
    blob: np.ndarray | None


def parse_threshold(spec) -> int | str:
    """``"otsu"``, ``"fixed:N"`` or an int."""
    if isinstance(spec, (int, np.integer)) and not isinstance(spec, bool):
        value = int(spec)
    elif spec == "otsu":
        return "otsu"
    elif isinstance(spec, str) and spec.startswith("fixed:") and spec[6:].strip().isdigit():
        value = int(spec[6:])
    else:
        raise InvalidArgument(f"threshold must be 'otsu' or 'fixed:N', got {spec!r}")
    if not 0 <= value <= 255:
        raise InvalidArgument("fixed threshold must be within 0..255")
    return value


class ForegroundSegmenter(TransformerMixin, BaseEstimator):
    """Segment the subject of a frame against a fixed background image.

    ``fit`` takes the background image; ``transform`` maps a frame to the mask of its
    single largest foreground blob (all False when nothing large enough is found).

    Parameters
    ----------
    threshold : "otsu", "fixed:N" or int
    open_radius, close_radius : int
        Square element radii for the opening then closing cleanup; 0 skips the step.
    min_area : int or None
        Smallest accepted blob in pixels. ``None`` uses ``min_area_fraction`` of the frame.
    min_area_fraction : float
    """

    def __init__(self, threshold="otsu", open_radius=1, close_radius=2, min_area=None, min_area_fraction=0.001):
        self.threshold = threshold
        self.open_radius = open_radius
        self.close_radius = close_radius
        self.min_area = min_area
        self.min_area_fraction = min_area_fraction

    def fit(self, background, y=None):
        self.background_ = _pixels(background).copy()
        self.threshold_mode_ = parse_threshold(self.threshold)
        for name in ("open_radius", "close_radius"):
            r = getattr(self, name)
            if isinstance(r, bool) or int(r) != r or r < 0:
                raise InvalidArgument(f"{name} must be a non-negative integer")
        h, w = self.background_.shape[:2]
        if self.min_area is not None:
            self.min_area_ = int(self.min_area)
        else:
            if not 0 <= self.min_area_fraction < 1:
                raise InvalidArgument("min_area_fraction must lie in [0, 1)")
            self.min_area_ = max(1, int(np.ceil(self.min_area_fraction * h * w)))
        return self

    def segment(self, frame) -> Segmentation:
        gray = diff_magnitude(frame, self.background_)
        if self.threshold_mode_ == "otsu":
            t = otsu_threshold(histogram256(gray))
        else:
            t = self.threshold_mode_
        raw = apply_threshold(gray, t)
        cleaned = raw
        if self.open_radius:
            cleaned = morphology(cleaned, "open", self.open_radius)
        if self.close_radius:
            cleaned = morphology(cleaned, "close", self.close_radius)
        return Segmentation(gray, t, raw, cleaned, largest_blob(cleaned, self.min_area_))

    def transform(self, frame) -> np.ndarray:
        blob = self.segment(frame).blob
        if blob is None:
            return np.zeros(self.background_.shape[:2], dtype=bool)
        return blob
