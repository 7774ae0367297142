"""End-to-end stroboscopic pipeline.

Pass 1 streams the input once to learn the background model at reduced
resolution. Pass 2 streams it again to segment the subject in every frame and
build the track. The chosen strobe frames are then fetched in one last read
and painted onto the full-resolution background.
"""
from __future__ import annotations

import dataclasses
import logging
import os
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

import numpy as np

from .background import BackgroundModel, ModelParams
from .compose import StrobeSelection, StrobeSelector, TrackEntry, composite
from .exceptions import InvalidArgument, NoFramesFound
from .frame_io import (
    Frame,
    downscale_box,
    iter_y4m,
    read_image_sequence,
    upscale_nearest,
    write_image,
    write_mask_png,
)
from .masks import ForegroundSegmenter, parse_threshold
from .moments import CSV_HEADER, blob_stats

log = logging.getLogger(__name__)

EXIT_OK, EXIT_USAGE, EXIT_INPUT, EXIT_NO_MOTION = 0, 1, 2, 3


@dataclass
class PipelineConfig:
    input: str = ""
    output: str = "strobe.png"
    format: str = "auto"  # auto | y4m | images
    fps: float | None = None
    downscale: int = 1
    alpha: float = 0.02
    components: int = 4
    sigma0: float = 225.0
    match_thresh: float = 9.0
    ct: float | None = None
    cf: float = 0.1
    cthr: float = 1e-5
    threshold: str = "otsu"
    morph_open: int = 1
    morph_close: int = 2
    min_area: float = 0.001
    dmin: str | None = None  # None: tune for target; "auto"; or a number
    target: tuple[int, int] = (5, 10)
    debug_dir: str | None = None
    seed: int = 0

    def model_params(self) -> ModelParams:
        return ModelParams(
            alpha=self.alpha,
            m_max=self.components,
            sigma0_sq=self.sigma0,
            match_thresh=self.match_thresh,
            c_t=self.ct,
            c_f=self.cf,
            c_thr=self.cthr,
        )

    def validate(self, image_output=True) -> "PipelineConfig":
        """Check every downstream precondition up front; raises InvalidArgument."""
        if not self.input:
            raise InvalidArgument("no input given")
        if self.format not in ("auto", "y4m", "images"):
            raise InvalidArgument(f"unknown input format {self.format!r}")
        if self.fps is not None and not self.fps > 0:
            raise InvalidArgument("fps must be positive")
        if isinstance(self.downscale, bool) or int(self.downscale) != self.downscale or self.downscale < 1:
            raise InvalidArgument("downscale must be an integer >= 1")
        self.model_params()
        parse_threshold(self.threshold)
        for name in ("morph_open", "morph_close"):
            if int(getattr(self, name)) != getattr(self, name) or getattr(self, name) < 0:
                raise InvalidArgument(f"{name} must be a non-negative integer")
        if not 0 <= self.min_area < 1:
            raise InvalidArgument("min_area is a fraction of the frame in [0, 1)")
        if self.dmin is not None and self.dmin != "auto":
            try:
                ok = float(self.dmin) > 0
            except ValueError:
                ok = False
            if not ok:
                raise InvalidArgument("dmin must be 'auto' or a positive number")
        n_min, n_max = self.target
        if not 1 <= n_min <= n_max:
            raise InvalidArgument("target must satisfy 1 <= n_min <= n_max")
        if image_output and Path(self.output).suffix.lower() not in (".png", ".ppm"):
            raise InvalidArgument("output must end in .png or .ppm")
        return self

    def as_lines(self) -> list[str]:
        out = []
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if isinstance(v, tuple):
                v = ",".join(map(str, v))
            out.append(f"{f.name.replace('_', '-')}={'' if v is None else v}")
        return out


_FIELD_TYPES = {f.name: f.type for f in dataclasses.fields(PipelineConfig)}


def coerce(key: str, raw: str):
    """Convert a config-file string value to the field's type."""
    name = key.replace("-", "_")
    if name not in _FIELD_TYPES:
        raise InvalidArgument(f"unknown config key {key!r}")
    raw = raw.strip()
    kind = _FIELD_TYPES[name]
    if raw == "" and "None" in kind:
        return name, None
    try:
        if kind.startswith("tuple"):
            a, b = raw.replace("[", "").replace("]", "").split(",")
            return name, (int(a), int(b))
        if kind.startswith("int"):
            return name, int(raw)
        if kind.startswith("float"):
            return name, float(raw)
    except ValueError:
        raise InvalidArgument(f"bad value for {key}: {raw!r}") from None
    return name, raw


def read_config_file(path) -> dict:
    """Parse ``key=value`` lines; ``#`` starts a comment."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InvalidArgument(f"cannot read config file: {exc}") from exc
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise InvalidArgument(f"{path}:{lineno}: expected key=value")
        name, v = coerce(key.strip(), value)
        values[name] = v
    return values


# ---------------------------------------------------------------------------


def iter_frames(config: PipelineConfig) -> Iterator[Frame]:
    fmt = config.format
    if fmt == "auto":
        fmt = "y4m" if config.input.lower().endswith(".y4m") else "images"
    if fmt == "y4m":
        return iter_y4m(config.input, config.fps)
    if "%" not in config.input and "{" not in config.input and not os.path.exists(config.input):
        raise NoFramesFound(f"{config.input} does not exist")
    return read_image_sequence(config.input, config.fps or 25)


@dataclass
class PipelineResult:
    status: int
    background: np.ndarray | None = None
    composite: np.ndarray | None = None
    track: list[TrackEntry] = field(default_factory=list)
    selection: StrobeSelection | None = None
    masks: dict[int, np.ndarray] = field(default_factory=dict)
    n_frames: int = 0


def learn_background(config: PipelineConfig) -> tuple[BackgroundModel, tuple[int, int], int]:
    """Pass 1. Returns the model, the full-resolution (height, width) and the frame count."""
    model = BackgroundModel.from_params(config.model_params())
    shape, n = None, 0
    start = time.perf_counter()
    for frame in iter_frames(config):
        shape = shape or (frame.height, frame.width)
        model.partial_fit(downscale_box(frame.pixels, config.downscale))
        n += 1
    if n:
        log.info("pass 1: %d frames, %.1f frames/s", n, n / max(time.perf_counter() - start, 1e-9))
    return model, shape, n


def _debug_path(config: PipelineConfig, name: str) -> Path | None:
    if config.debug_dir is None:
        return None
    os.makedirs(config.debug_dir, exist_ok=True)
    return Path(config.debug_dir) / name


def segment_video(config: PipelineConfig, background_small: np.ndarray, full_shape, keep_masks=False):
    """Pass 2: per-frame segmentation at model resolution, track at full resolution."""
    seg = ForegroundSegmenter(
        threshold=config.threshold,
        open_radius=config.morph_open,
        close_radius=config.morph_close,
        min_area_fraction=config.min_area,
    ).fit(background_small)
    track, masks = [], {}
    csv = _debug_path(config, "blobs.csv")
    rows = [CSV_HEADER]
    start, n = time.perf_counter(), 0
    for frame in iter_frames(config):
        n += 1
        small = downscale_box(frame.pixels, config.downscale)
        blob = seg.segment(small).blob
        if config.debug_dir is not None:
            shown = blob if blob is not None else np.zeros(small.shape[:2], bool)
            write_mask_png(shown, _debug_path(config, f"mask_{frame.frame_index:05d}.png"))
        if keep_masks:
            masks[frame.frame_index] = blob if blob is not None else np.zeros(small.shape[:2], bool)
        if blob is None:
            continue
        full = upscale_nearest(blob, config.downscale, full_shape)
        stats = blob_stats(full, frame.frame_index, frame.timestamp_s)
        track.append(TrackEntry(frame.frame_index, stats, full))
        rows.append(stats.csv_row())
    log.info("pass 2: %d frames, %.1f frames/s, %d with a subject", n, n / max(time.perf_counter() - start, 1e-9), len(track))
    if csv is not None:
        csv.write_text("\n".join(rows) + "\n")
    return track, masks


def _write_debug_config(config: PipelineConfig) -> None:
    path = _debug_path(config, "config.txt")
    if path is not None:
        path.write_text("\n".join(config.as_lines()) + "\n")


def _select(config: PipelineConfig, track, full_shape) -> StrobeSelection:
    d_min = config.dmin if config.dmin in (None, "auto") else float(config.dmin)
    selector = StrobeSelector(d_min=d_min, target=tuple(config.target))
    return selector.fit(track, diagonal=float(np.hypot(full_shape[1], full_shape[0]))).selection_


def run_background_only(config: PipelineConfig) -> PipelineResult:
    config.validate()
    _write_debug_config(config)
    model, full_shape, n = learn_background(config)
    if n == 0:
        raise InvalidArgument("input has no frames")
    bg = model.background_image()
    write_image(bg, config.output)
    return PipelineResult(EXIT_OK, background=bg, n_frames=n)


def run_masks(config: PipelineConfig, out_dir) -> PipelineResult:
    """Pass 1 plus segmentation; masks are written to ``out_dir/mask_%05d.png``."""
    config.validate(image_output=False)
    _write_debug_config(config)
    model, full_shape, n = learn_background(config)
    if n == 0:
        raise InvalidArgument("input has no frames")
    bg = model.background_image()
    track, masks = segment_video(config, bg, full_shape, keep_masks=True)
    os.makedirs(out_dir, exist_ok=True)
    for idx, mask in masks.items():
        write_mask_png(mask, Path(out_dir) / f"mask_{idx:05d}.png")
    return PipelineResult(EXIT_OK if track else EXIT_NO_MOTION, background=bg, track=track, masks=masks, n_frames=n)


def run_strobe_pipeline(config: PipelineConfig) -> PipelineResult:
    config.validate()
    _write_debug_config(config)
    model, full_shape, n = learn_background(config)
    if n == 0:
        raise InvalidArgument("input has no frames")
    bg_small = model.background_image()
    bg_full = upscale_nearest(bg_small, config.downscale, full_shape)
    if config.debug_dir is not None:
        write_image(bg_small, _debug_path(config, "background.png"))

    track, _ = segment_video(config, bg_small, full_shape)
    if not track:
        log.warning("no moving subject found")
        return PipelineResult(EXIT_NO_MOTION, background=bg_full, n_frames=n)

    selection = _select(config, track, full_shape)
    if selection.short:
        log.warning("only %d separated strobes available (wanted %d)", len(selection), config.target[0])
    chosen = set(selection.chosen)
    masks = {e.frame_index: e.mask for e in track if e.frame_index in chosen}
    frames = {}
    for frame in iter_frames(config):
        if frame.frame_index in chosen:
            frames[frame.frame_index] = frame
            if len(frames) == len(chosen):
                break
    out = composite(bg_full, selection, frames, masks)
    write_image(out, config.output)

    sel_path = _debug_path(config, "selection.txt")
    if sel_path is not None:
        lines = [f"{idx} {cx:.3f} {cy:.3f}" for idx, (cx, cy) in zip(selection.chosen, selection.centroids)]
        sel_path.write_text("\n".join(lines) + "\n")
    return PipelineResult(EXIT_OK, bg_full, out, track, selection, masks, n)
