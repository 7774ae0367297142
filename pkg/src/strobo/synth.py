"""Synthetic scenes with exact ground truth: one disk moving over a static background."""
from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .exceptions import IndexOutOfRange, InvalidArgument
from .frame_io import DEFAULT_FPS, Frame, write_image, write_mask_png, write_y4m
from .validation import round_half_away


@dataclass(frozen=True)
class SceneSpec:
    width: int = 320
    height: int = 240
    n_frames: int = 125
    background: str = "gradient"  # gradient | checker | flat
    color_a: tuple[int, int, int] = (40, 70, 110)
    color_b: tuple[int, int, int] = (150, 170, 120)
    checker_size: int = 16
    disk_radius: float = 10.0
    disk_color: tuple[int, int, int] = (230, 40, 40)
    start: tuple[float, float] = (30.0, 120.0)
    velocity: tuple[float, float] = (2.1, 0.0)
    accel: tuple[float, float] | None = None
    noise_sigma: float = 0.0
    seed: int = 0
    fps: float = DEFAULT_FPS

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0 or self.n_frames <= 0:
            raise InvalidArgument("scene dimensions and frame count must be positive")
        if self.background not in ("gradient", "checker", "flat"):
            raise InvalidArgument(f"unknown background {self.background!r}")
        if self.disk_radius < 2:
            raise InvalidArgument("disk_radius must be at least 2")
        if self.noise_sigma < 0:
            raise InvalidArgument("noise_sigma must be non-negative")
        r = self.disk_radius
        for k in range(self.n_frames):
            cx, cy = self.trajectory(k)
            if cx - r < 0 or cy - r < 0 or cx + r > self.width - 1 or cy + r > self.height - 1:
                raise InvalidArgument(f"disk leaves the frame at k={k} (centre {cx:.2f}, {cy:.2f})")

    def trajectory(self, k: int) -> tuple[float, float]:
        ax, ay = self.accel or (0.0, 0.0)
        return (
            self.start[0] + self.velocity[0] * k + 0.5 * ax * k * k,
            self.start[1] + self.velocity[1] * k + 0.5 * ay * k * k,
        )


def background_pattern(spec: SceneSpec) -> np.ndarray:
    """Noise-free background as an ``(H, W, 3)`` uint8 image."""
    h, w = spec.height, spec.width
    a = np.asarray(spec.color_a, dtype=np.float64)
    b = np.asarray(spec.color_b, dtype=np.float64)
    if spec.background == "flat":
        img = np.broadcast_to(a, (h, w, 3))
    elif spec.background == "checker":
        ys, xs = np.mgrid[0:h, 0:w]
        odd = ((xs // spec.checker_size) + (ys // spec.checker_size)) % 2 == 1
        img = np.where(odd[..., None], b, a)
    else:
        ys, xs = np.mgrid[0:h, 0:w]
        t = (xs / max(w - 1, 1) + ys / max(h - 1, 1)) / 2.0
        img = a + (b - a) * t[..., None]
    return np.clip(round_half_away(img), 0, 255).astype(np.uint8)


def _check_index(spec: SceneSpec, k: int) -> None:
    if not 0 <= k < spec.n_frames:
        raise IndexOutOfRange(f"frame {k} outside 0..{spec.n_frames - 1}")


def ground_truth_mask(spec: SceneSpec, k: int) -> np.ndarray:
    """Disk membership: a pixel belongs when its centre is within the radius of the disk centre."""
    _check_index(spec, k)
    cx, cy = spec.trajectory(k)
    ys, xs = np.mgrid[0 : spec.height, 0 : spec.width]
    return (xs - cx) ** 2 + (ys - cy) ** 2 <= spec.disk_radius**2


def frame_noise(spec: SceneSpec, k: int) -> np.ndarray:
    # Philox keyed by (seed, k): the value at pixel (x, y) is counter y*W + x of that stream,
    # so every frame is reproducible on its own
    gen = np.random.Generator(np.random.Philox(key=[spec.seed, k]))
    return gen.standard_normal((spec.height, spec.width)) * spec.noise_sigma


def render_frame(spec: SceneSpec, k: int) -> Frame:
    _check_index(spec, k)
    img = background_pattern(spec).astype(np.float64)
    img[ground_truth_mask(spec, k)] = spec.disk_color
    if spec.noise_sigma > 0:
        img = img + frame_noise(spec, k)[..., None]
    pixels = np.clip(round_half_away(img), 0, 255).astype(np.uint8)
    return Frame(pixels, k, k / spec.fps)


def render_video(spec: SceneSpec):
    for k in range(spec.n_frames):
        yield render_frame(spec, k)


def write_scene(spec: SceneSpec, output, masks_dir=None) -> None:
    """Write the scene as a Y4M file (``*.y4m``) or a numbered image sequence pattern.

    Ground-truth masks go to ``masks_dir/gt_%05d.png`` when given.
    """
    output = str(output)
    parent = os.path.dirname(output)
    if parent:
        os.makedirs(parent, exist_ok=True)
    if output.endswith(".y4m"):
        fps = float(spec.fps)
        num, den = (int(fps), 1) if fps.is_integer() else (int(round(fps * 1000)), 1000)
        write_y4m(output, render_video(spec), num, den)
    else:
        from .frame_io import split_pattern

        prefix, suffix, fmt = split_pattern(output)
        kind = "ppm" if suffix.lower().endswith(".ppm") else "png"
        for frame in render_video(spec):
            write_image(frame, prefix + fmt.format(frame.frame_index) + suffix, kind)
    if masks_dir is not None:
        os.makedirs(masks_dir, exist_ok=True)
        for k in range(spec.n_frames):
            write_mask_png(ground_truth_mask(spec, k), Path(masks_dir) / f"gt_{k:05d}.png")
