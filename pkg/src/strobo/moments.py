"""Image moments of binary masks. Coordinates: x = column, y = row, origin top-left."""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .exceptions import EmptyMask
from .validation import check_mask


class Moments(NamedTuple):
    m00: int
    m10: int
    m01: int
    mu20: float
    mu02: float
    mu11: float

    @property
    def centroid(self) -> tuple[float, float]:
        return self.m10 / self.m00, self.m01 / self.m00


def compute_moments(mask) -> Moments:
    """Raw moments up to first order (exact ints) and second-order central moments.

    Central moments use ``mu_pq = (M00*M_pq - M_p0*M_0q) / M00``, evaluated in
    integers before the single division, so they carry no cancellation error.
    """
    ys, xs = np.nonzero(check_mask(mask))
    if xs.size == 0:
        raise EmptyMask("mask has no set pixels")
    # int64 sums of squared coordinates stay exact far beyond any real raster size
    xs, ys = xs.astype(np.int64), ys.astype(np.int64)
    m00 = int(xs.size)
    m10, m01 = int(xs.sum()), int(ys.sum())
    m20, m02, m11 = int((xs * xs).sum()), int((ys * ys).sum()), int((xs * ys).sum())
    return Moments(
        m00,
        m10,
        m01,
        (m00 * m20 - m10 * m10) / m00,
        (m00 * m02 - m01 * m01) / m00,
        (m00 * m11 - m10 * m01) / m00,
    )


@dataclass(frozen=True)
class BlobStats:
    frame_index: int
    area: int
    centroid: tuple[float, float]
    mu20: float
    mu02: float
    mu11: float
    bbox: tuple[int, int, int, int]  # min_x, min_y, max_x, max_y
    timestamp_s: float = 0.0

    @property
    def bbox_diagonal(self) -> float:
        min_x, min_y, max_x, max_y = self.bbox
        return float(np.hypot(max_x - min_x + 1, max_y - min_y + 1))

    def csv_row(self) -> str:
        cx, cy = self.centroid
        return (
            f"{self.frame_index},{self.timestamp_s:.6f},{self.area},{cx:.6f},{cy:.6f},"
            f"{self.mu20:.6f},{self.mu02:.6f},{self.mu11:.6f}"
        )


CSV_HEADER = "frame,timestamp,area,cx,cy,mu20,mu02,mu11"


def blob_stats(mask, frame_index: int, timestamp_s: float = 0.0) -> BlobStats:
    mask = check_mask(mask)
    m = compute_moments(mask)
    cols = np.flatnonzero(mask.any(axis=0))
    rows = np.flatnonzero(mask.any(axis=1))
    return BlobStats(
        frame_index,
        m.m00,
        m.centroid,
        m.mu20,
        m.mu02,
        m.mu11,
        (int(cols[0]), int(rows[0]), int(cols[-1]), int(rows[-1])),
        timestamp_s,
    )
