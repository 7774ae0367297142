"""Strobe frame selection along a subject track, and compositing onto the background."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from sklearn.base import BaseEstimator

from .exceptions import DimensionMismatch, InvalidArgument, MissingFrame
from .frame_io import Frame
from .moments import BlobStats
from .validation import check_mask, check_rgb

BISECTION_STEPS = 32


@dataclass(frozen=True)
class TrackEntry:
    frame_index: int
    stats: BlobStats
    mask: np.ndarray | None = field(default=None, repr=False)

    @property
    def centroid(self) -> tuple[float, float]:
        return self.stats.centroid


def make_track(entries: Sequence[TrackEntry]) -> list[TrackEntry]:
    """Validate temporal order and non-empty masks; returns the entries as a list."""
    entries = list(entries)
    for prev, cur in zip(entries, entries[1:]):
        if cur.frame_index <= prev.frame_index:
            raise InvalidArgument("track frame indices must strictly increase")
    for e in entries:
        if e.mask is not None and not np.any(e.mask):
            raise InvalidArgument(f"track entry {e.frame_index} has an empty mask")
    return entries


@dataclass(frozen=True)
class StrobeSelection:
    chosen: tuple[int, ...]
    d_min_used: float
    centroids: tuple[tuple[float, float], ...] = ()
    short: bool = False  # the track could not supply the requested minimum count

    def __len__(self):
        return len(self.chosen)


def _as_entry(item) -> TrackEntry:
    if isinstance(item, TrackEntry):
        return item
    if isinstance(item, BlobStats):
        return TrackEntry(item.frame_index, item)
    raise InvalidArgument(f"cannot use {type(item).__name__} as a track entry")


def select_frames_greedy(track, d_min: float) -> StrobeSelection:
    """Accept entries in temporal order when at least ``d_min`` from every accepted centroid."""
    if not d_min > 0:
        raise InvalidArgument("d_min must be positive")
    chosen, points = [], []
    for entry in map(_as_entry, track):
        cx, cy = entry.centroid
        if all(math.hypot(cx - px, cy - py) >= d_min for px, py in points):
            chosen.append(entry.frame_index)
            points.append((cx, cy))
    return StrobeSelection(tuple(chosen), float(d_min), tuple(points))


def _track_diagonal(entries: list[TrackEntry]) -> float:
    for e in entries:
        if e.mask is not None:
            h, w = e.mask.shape
            return math.hypot(w, h)
    # no masks: the spread of the centroids bounds every useful spacing
    xs = [e.centroid[0] for e in entries]
    ys = [e.centroid[1] for e in entries]
    return max(1.0, math.hypot(max(xs) - min(xs), max(ys) - min(ys)) + 1.0)


def tune_spacing_for_count(track, n_min: int = 5, n_max: int = 10, diagonal: float | None = None) -> StrobeSelection:
    """Bisect ``d_min`` over [1, diagonal] for the widest spacing giving ``n_min..n_max`` strobes.

    Relies on the greedy count being non-increasing in ``d_min``. When even ``d_min = 1``
    yields fewer than ``n_min`` strobes, that selection is returned with ``short=True``.
    """
    if not (isinstance(n_min, int) and isinstance(n_max, int)) or not 1 <= n_min <= n_max:
        raise InvalidArgument(f"need 1 <= n_min <= n_max, got {n_min}, {n_max}")
    entries = [_as_entry(e) for e in track]
    if not entries:
        return StrobeSelection((), 1.0, (), short=True)
    lo_sel = select_frames_greedy(entries, 1.0)
    if len(lo_sel) < n_min:
        return StrobeSelection(lo_sel.chosen, lo_sel.d_min_used, lo_sel.centroids, short=True)

    lo = 1.0
    hi = max(float(diagonal if diagonal is not None else _track_diagonal(entries)), lo)
    best = lo_sel if len(lo_sel) <= n_max else None
    top = select_frames_greedy(entries, hi)
    if n_min <= len(top) <= n_max:
        return top
    for _ in range(BISECTION_STEPS):
        mid = 0.5 * (lo + hi)
        sel = select_frames_greedy(entries, mid)
        if len(sel) >= n_min:
            lo = mid
            if len(sel) <= n_max:
                best = sel
        else:
            hi = mid
    # best is None only when the count jumps straight over [n_min, n_max]
    return best if best is not None else select_frames_greedy(entries, lo)


def auto_spacing(track) -> float:
    """Default fixed spacing: 1.5x the mean blob bounding-box diagonal."""
    entries = [_as_entry(e) for e in track]
    if not entries:
        return 1.0
    return 1.5 * float(np.mean([e.stats.bbox_diagonal for e in entries]))


def composite(background, selection: StrobeSelection, frames: Mapping, masks: Mapping) -> np.ndarray:
    """Paint each chosen frame's masked pixels over the background, earliest first.

    ``frames`` and ``masks`` map frame index to a Frame/RGB array and a bool mask.
    """
    out = (background.pixels if isinstance(background, Frame) else check_rgb(background)).copy()
    for idx in selection.chosen:
        if idx not in frames or idx not in masks:
            raise MissingFrame(f"no frame or mask supplied for frame {idx}")
        src = frames[idx]
        src = src.pixels if isinstance(src, Frame) else check_rgb(src)
        mask = check_mask(masks[idx])
        if src.shape != out.shape or mask.shape != out.shape[:2]:
            raise DimensionMismatch(f"frame {idx} does not match the background size")
        out[mask] = src[mask]
    return out


class StrobeSelector(BaseEstimator):
    """Choose strobe frames from a track.

    With ``d_min=None`` the spacing is tuned for ``target`` strobes; ``d_min="auto"``
    uses :func:`auto_spacing`; a number fixes the spacing.
    """

    def __init__(self, d_min=None, target=(5, 10)):
        self.d_min = d_min
        self.target = target

    def fit(self, track, y=None, diagonal=None):
        entries = make_track(_as_entry(e) for e in track)
        if self.d_min is None:
            n_min, n_max = self.target
            self.selection_ = tune_spacing_for_count(entries, n_min, n_max, diagonal)
        else:
            d = auto_spacing(entries) if self.d_min == "auto" else float(self.d_min)
            self.selection_ = select_frames_greedy(entries, d) if entries else StrobeSelection((), d)
        return self

    def transform(self, track):
        keep = set(self.selection_.chosen)
        return [e for e in map(_as_entry, track) if e.frame_index in keep]
