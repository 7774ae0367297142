"""Pixel ingress and egress: Y4M, PPM and PNG, colour conversion and box downscaling.

All rasters are held as ``(height, width, 3)`` uint8 numpy arrays, row-major RGB.
Colour conversion uses limited-range BT.601::

    R = 255/219 (Y-16)                              + 255/224 * 1.402 (V-128)
    G = 255/219 (Y-16) - 255/224 * 0.344136 (U-128) - 255/224 * 0.714136 (V-128)
    B = 255/219 (Y-16) + 255/224 * 1.772 (U-128)

followed by round-half-away-from-zero and clamping to [0, 255].
"""
from __future__ import annotations

import os
import re
from dataclasses import dataclass
from pathlib import Path
from typing import BinaryIO, Iterator

import numpy as np
from PIL import Image

from .exceptions import (
    DimensionMismatch,
    InvalidArgument,
    IoFailure,
    MalformedHeader,
    MissingFrameMarker,
    NoFramesFound,
    TruncatedFrame,
    UnsupportedChroma,
    UnsupportedPixelFormat,
)
from .validation import check_positive_int, check_rgb, round_half_away

Y4M_MAGIC = b"YUV4MPEG2"
DEFAULT_FPS = 25

# longest header / FRAME line we are willing to buffer before calling it garbage
_MAX_LINE = 4096

_KR, _KB = 0.299, 0.114
_KG = 1.0 - _KR - _KB
_Y_SCALE = 255.0 / 219.0
_C_SCALE = 255.0 / 224.0

# rows: R, G, B; columns: (Y-16), (U-128), (V-128)
YUV_TO_RGB = np.array(
    [
        [_Y_SCALE, 0.0, _C_SCALE * 2 * (1 - _KR)],
        [_Y_SCALE, -_C_SCALE * 2 * (1 - _KB) * _KB / _KG, -_C_SCALE * 2 * (1 - _KR) * _KR / _KG],
        [_Y_SCALE, _C_SCALE * 2 * (1 - _KB), 0.0],
    ]
)
RGB_TO_YUV = np.linalg.inv(YUV_TO_RGB)

_CHROMA_420 = {"420", "420jpeg", "420mpeg2", "420paldv"}


@dataclass(frozen=True)
class VideoHeader:
    width: int
    height: int
    fps_num: int = DEFAULT_FPS
    fps_den: int = 1
    chroma: str = "420jpeg"
    interlace_tag: str | None = None
    extra_tokens: tuple[str, ...] = ()

    @property
    def fps(self) -> float:
        return self.fps_num / self.fps_den

    def timestamp(self, frame_index: int) -> float:
        return frame_index * self.fps_den / self.fps_num

    def to_bytes(self) -> bytes:
        tokens = [f"W{self.width}", f"H{self.height}", f"F{self.fps_num}:{self.fps_den}"]
        if self.interlace_tag is not None:
            tokens.append(f"I{self.interlace_tag}")
        tokens.append(f"C{self.chroma}")
        tokens.extend(self.extra_tokens)
        return Y4M_MAGIC + b" " + " ".join(tokens).encode("ascii") + b"\n"


@dataclass(frozen=True, eq=False)
class Frame:
    """One RGB raster. ``pixels`` is a read-only ``(height, width, 3)`` uint8 array."""

    pixels: np.ndarray
    frame_index: int = 0
    timestamp_s: float = 0.0

    def __post_init__(self):
        arr = check_rgb(self.pixels)
        if arr is self.pixels:
            arr = arr.copy()
        arr.flags.writeable = False
        object.__setattr__(self, "pixels", arr)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    def same_pixels(self, other: "Frame") -> bool:
        return self.pixels.shape == other.pixels.shape and bool(np.array_equal(self.pixels, other.pixels))


# ---------------------------------------------------------------------------
# colour conversion


def yuv_to_rgb(y, u, v):
    """Limited-range BT.601 YCbCr to 8-bit RGB.

    Accepts scalars or broadcastable arrays. Scalars give back an ``(r, g, b)``
    tuple of ints; arrays give a ``(..., 3)`` uint8 array.
    """
    scalar = np.ndim(y) == 0 and np.ndim(u) == 0 and np.ndim(v) == 0
    yuv = np.stack(
        np.broadcast_arrays(
            np.asarray(y, dtype=np.float64) - 16.0,
            np.asarray(u, dtype=np.float64) - 128.0,
            np.asarray(v, dtype=np.float64) - 128.0,
        ),
        axis=-1,
    )
    rgb = np.clip(round_half_away(yuv @ YUV_TO_RGB.T), 0, 255).astype(np.uint8)
    if scalar:
        return tuple(int(c) for c in rgb)
    return rgb


def rgb_to_yuv420(pixels) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Inverse BT.601 conversion with 2x2 chroma averaging; returns uint8 Y, Cb, Cr planes."""
    rgb = check_rgb(pixels).astype(np.float64)
    h, w = rgb.shape[:2]
    if h % 2 or w % 2:
        raise InvalidArgument("4:2:0 output needs even width and height")
    yuv = rgb @ RGB_TO_YUV.T + np.array([16.0, 128.0, 128.0])
    y = np.clip(round_half_away(yuv[..., 0]), 0, 255).astype(np.uint8)
    chroma = yuv[..., 1:].reshape(h // 2, 2, w // 2, 2, 2).mean(axis=(1, 3))
    chroma = np.clip(round_half_away(chroma), 0, 255).astype(np.uint8)
    return y, np.ascontiguousarray(chroma[..., 0]), np.ascontiguousarray(chroma[..., 1])


def yuv420_to_rgb(y: np.ndarray, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Planes to RGB, each chroma sample covering its 2x2 luma block."""
    u_full = np.repeat(np.repeat(u, 2, axis=0), 2, axis=1)
    v_full = np.repeat(np.repeat(v, 2, axis=0), 2, axis=1)
    return yuv_to_rgb(y, u_full, v_full)


# ---------------------------------------------------------------------------
# Y4M


def _readline(stream: BinaryIO) -> bytes:
    return stream.readline(_MAX_LINE)


def parse_y4m_header(stream: BinaryIO) -> VideoHeader:
    line = _readline(stream)
    if not line.endswith(b"\n"):
        raise MalformedHeader("header is not newline-terminated")
    tokens = line[:-1].split(b" ")
    if tokens[0] != Y4M_MAGIC:
        raise MalformedHeader("bad magic, expected YUV4MPEG2")

    width = height = None
    fps_num, fps_den = DEFAULT_FPS, 1
    chroma = "420jpeg"
    interlace = None
    extra = []
    for raw in tokens[1:]:
        if not raw:
            continue
        try:
            tok = raw.decode("ascii")
        except UnicodeDecodeError:
            raise MalformedHeader(f"non-ASCII header token {raw!r}") from None
        key, val = tok[0], tok[1:]
        if key in "WH":
            if not val.isdigit() or int(val) <= 0:
                raise MalformedHeader(f"bad dimension token {tok!r}")
            if key == "W":
                width = int(val)
            else:
                height = int(val)
        elif key == "F":
            num, sep, den = val.partition(":")
            if not sep or not num.isdigit() or not den.isdigit() or int(num) <= 0 or int(den) <= 0:
                raise MalformedHeader(f"bad frame-rate token {tok!r}")
            fps_num, fps_den = int(num), int(den)
        elif key == "C":
            if val not in _CHROMA_420:
                raise UnsupportedChroma(f"chroma {val!r} is not 8-bit 4:2:0")
            chroma = val
        elif key == "I":
            interlace = val
        else:
            extra.append(tok)
    if width is None or height is None:
        raise MalformedHeader("header lacks W or H")
    if width % 2 or height % 2:
        raise MalformedHeader(f"4:2:0 needs even dimensions, got {width}x{height}")
    return VideoHeader(width, height, fps_num, fps_den, chroma, interlace, tuple(extra))


def _read_exact(stream: BinaryIO, n: int, what: str) -> bytes:
    data = stream.read(n)
    if len(data) != n:
        raise TruncatedFrame(f"stream ended inside the {what} plane ({len(data)} of {n} bytes)")
    return data


def read_y4m_planes(stream: BinaryIO, header: VideoHeader):
    """Read one frame's raw Y, Cb, Cr planes, or return None at a clean end of stream."""
    marker = _readline(stream)
    if not marker:
        return None
    if not marker.startswith(b"FRAME") or not marker.endswith(b"\n"):
        raise MissingFrameMarker(f"expected FRAME marker, got {marker[:16]!r}")
    w, h = header.width, header.height
    cw, ch = w // 2, h // 2
    y = np.frombuffer(_read_exact(stream, w * h, "Y"), np.uint8).reshape(h, w)
    u = np.frombuffer(_read_exact(stream, cw * ch, "Cb"), np.uint8).reshape(ch, cw)
    v = np.frombuffer(_read_exact(stream, cw * ch, "Cr"), np.uint8).reshape(ch, cw)
    return y, u, v


def read_y4m_frame(stream: BinaryIO, header: VideoHeader, frame_index: int = 0) -> Frame | None:
    planes = read_y4m_planes(stream, header)
    if planes is None:
        return None
    return Frame(yuv420_to_rgb(*planes), frame_index, header.timestamp(frame_index))


def iter_y4m(path, fps: float | None = None) -> Iterator[Frame]:
    """Yield the frames of a Y4M file. ``fps`` overrides the header rate for timestamps."""
    try:
        stream = open(path, "rb")
    except OSError as exc:
        raise IoFailure(str(exc)) from exc
    with stream:
        header = parse_y4m_header(stream)
        k = 0
        while True:
            frame = read_y4m_frame(stream, header, k)
            if frame is None:
                return
            if fps is not None:
                frame = Frame(frame.pixels, k, k / fps)
            yield frame
            k += 1


def read_y4m_header_file(path) -> VideoHeader:
    try:
        with open(path, "rb") as stream:
            return parse_y4m_header(stream)
    except OSError as exc:
        raise IoFailure(str(exc)) from exc


def write_y4m_frame_planes(stream: BinaryIO, y, u, v) -> None:
    stream.write(b"FRAME\n")
    for plane in (y, u, v):
        stream.write(np.ascontiguousarray(plane, dtype=np.uint8).tobytes())


def write_y4m(path, frames, fps_num: int = DEFAULT_FPS, fps_den: int = 1) -> VideoHeader:
    """Write RGB frames (Frame objects or arrays) as a 4:2:0 Y4M file."""
    header = None
    try:
        with open(path, "wb") as stream:
            for frame in frames:
                pixels = frame.pixels if isinstance(frame, Frame) else frame
                planes = rgb_to_yuv420(pixels)
                if header is None:
                    h, w = planes[0].shape
                    header = VideoHeader(w, h, fps_num, fps_den, "420jpeg", "p")
                    stream.write(header.to_bytes())
                elif planes[0].shape != (header.height, header.width):
                    raise DimensionMismatch("all frames of a video must share one size")
                write_y4m_frame_planes(stream, *planes)
    except OSError as exc:
        raise IoFailure(str(exc)) from exc
    if header is None:
        raise InvalidArgument("no frames to write")
    return header


# ---------------------------------------------------------------------------
# still images


def _ppm_tokens(data: bytes, count: int):
    tokens, pos = [], 2
    while len(tokens) < count:
        while pos < len(data) and (data[pos : pos + 1].isspace() or data[pos : pos + 1] == b"#"):
            if data[pos : pos + 1] == b"#":
                end = data.find(b"\n", pos)
                pos = len(data) if end < 0 else end
            pos += 1
        start = pos
        while pos < len(data) and data[pos : pos + 1].isdigit():
            pos += 1
        if start == pos:
            raise UnsupportedPixelFormat("malformed PPM header")
        tokens.append(int(data[start:pos]))
    # exactly one whitespace byte separates maxval from the raster
    return tokens, pos + 1


def _read_ppm(data: bytes) -> np.ndarray:
    if data[:2] != b"P6":
        raise UnsupportedPixelFormat("only binary P6 PPM is supported")
    (w, h, maxval), offset = _ppm_tokens(data, 3)
    if maxval != 255:
        raise UnsupportedPixelFormat(f"PPM maxval {maxval} is not 255")
    if w <= 0 or h <= 0:
        raise UnsupportedPixelFormat("PPM has zero size")
    raster = data[offset : offset + w * h * 3]
    if len(raster) != w * h * 3:
        raise UnsupportedPixelFormat("PPM raster is truncated")
    return np.frombuffer(raster, np.uint8).reshape(h, w, 3).copy()


_PNG_SIG = b"\x89PNG\r\n\x1a\n"


def _read_png(data: bytes, path) -> np.ndarray:
    # IHDR is always the first chunk; Pillow silently narrows 16-bit RGB so check it here
    if len(data) < 33 or data[12:16] != b"IHDR":
        raise UnsupportedPixelFormat(f"{path}: malformed PNG")
    bit_depth, colour_type = data[24], data[25]
    if bit_depth != 8 or colour_type not in (2, 6):
        raise UnsupportedPixelFormat(
            f"{path}: PNG must be 8-bit RGB or RGBA (bit depth {bit_depth}, colour type {colour_type})"
        )
    from io import BytesIO

    with Image.open(BytesIO(data)) as im:
        return np.asarray(im.convert("RGB"), dtype=np.uint8).copy()


def read_image(path) -> np.ndarray:
    """Read a P6 PPM or 8-bit RGB(A) PNG into an ``(H, W, 3)`` uint8 array."""
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise IoFailure(str(exc)) from exc
    if data.startswith(_PNG_SIG):
        return _read_png(data, path)
    if data[:1] == b"P":
        return _read_ppm(data)
    raise UnsupportedPixelFormat(f"{path}: neither PPM nor PNG")


def write_image(frame, path, format: str | None = None) -> None:
    """Write a frame (or RGB array) as binary PPM or 8-bit PNG. Format defaults from the suffix."""
    pixels = frame.pixels if isinstance(frame, Frame) else check_rgb(frame)
    path = Path(path)
    if format is None:
        format = "ppm" if path.suffix.lower() == ".ppm" else "png"
    format = format.lower()
    if format not in ("ppm", "png"):
        raise InvalidArgument(f"unknown image format {format!r}")
    h, w = pixels.shape[:2]
    try:
        if format == "ppm":
            with open(path, "wb") as fh:
                fh.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
                fh.write(np.ascontiguousarray(pixels).tobytes())
        else:
            if not path.parent.is_dir():
                raise FileNotFoundError(f"no such directory: {path.parent}")
            Image.fromarray(np.ascontiguousarray(pixels), "RGB").save(path, format="PNG")
    except OSError as exc:
        raise IoFailure(str(exc)) from exc


def write_mask_png(mask, path) -> None:
    """Debug helper: boolean mask to 0/255 grayscale PNG."""
    arr = np.where(np.asarray(mask, dtype=bool), 255, 0).astype(np.uint8)
    try:
        Image.fromarray(arr, "L").save(path, format="PNG")
    except OSError as exc:
        raise IoFailure(str(exc)) from exc


_PRINTF = re.compile(r"%(0?)(\d*)d")
_BRACES = re.compile(r"\{(?::(0?)(\d*)d)?\}")


def split_pattern(pattern: str):
    """Return (prefix, suffix, formatter) for a pattern with one integer placeholder."""
    matches = list(_PRINTF.finditer(pattern)) + list(_BRACES.finditer(pattern))
    if len(matches) != 1:
        raise InvalidArgument(f"pattern {pattern!r} needs exactly one integer placeholder (%d, %05d or {{}})")
    m = matches[0]
    zero, width = m.group(1) or "", m.group(2) or ""
    spec = f"{{:{zero}{width}d}}" if width else "{:d}"
    return pattern[: m.start()], pattern[m.end() :], spec


def _sequence_paths(pattern: str) -> list[str]:
    prefix, suffix, spec = split_pattern(pattern)
    directory, base = os.path.split(prefix)
    directory = directory or "."
    regex = re.compile(re.escape(base) + r"(\d+)" + re.escape(suffix) + r"\Z")
    try:
        names = os.listdir(directory)
    except OSError:
        names = []
    found = []
    for name in names:
        m = regex.match(name)
        # the formatted name must round-trip so %05d does not pick up frame7.png
        if m and base + spec.format(int(m.group(1))) + suffix == name:
            found.append(int(m.group(1)))
    if not found:
        raise NoFramesFound(f"no files match {pattern!r}")
    k = min(found)
    paths = []
    while True:
        candidate = prefix + spec.format(k) + suffix
        if not os.path.isfile(candidate):
            break
        paths.append(candidate)
        k += 1
    return paths


def read_image_sequence(path_pattern: str, fps: float = DEFAULT_FPS) -> Iterator[Frame]:
    """Yield frames from numbered still images, starting at the lowest existing index.

    ``frame_index`` counts from 0 in stream order; timestamps come from ``fps``.
    """
    if fps <= 0:
        raise InvalidArgument("fps must be positive")
    paths = _sequence_paths(path_pattern)
    shape = None
    for k, path in enumerate(paths):
        pixels = read_image(path)
        if shape is None:
            shape = pixels.shape
        elif pixels.shape != shape:
            raise DimensionMismatch(
                f"{path} is {pixels.shape[1]}x{pixels.shape[0]}, expected {shape[1]}x{shape[0]}"
            )
        yield Frame(pixels, k, k / fps)


# ---------------------------------------------------------------------------
# resampling


def downscale_box(frame, factor: int):
    """Box-filter downscale by an integer factor; partial edge blocks average what they hold.

    Accepts a Frame (returns a Frame) or an ``(H, W, C)``/``(H, W)`` array (returns uint8 array).
    """
    if isinstance(factor, bool) or int(factor) != factor or factor < 1:
        raise InvalidArgument(f"downscale factor must be an integer >= 1, got {factor!r}")
    factor = int(factor)
    is_frame = isinstance(frame, Frame)
    pixels = frame.pixels if is_frame else np.asarray(frame)
    if factor == 1:
        out = pixels.copy()
    else:
        h, w = pixels.shape[:2]
        rows = np.arange(0, h, factor)
        cols = np.arange(0, w, factor)
        sums = np.add.reduceat(np.add.reduceat(pixels.astype(np.int64), rows, axis=0), cols, axis=1)
        counts = np.outer(np.diff(np.append(rows, h)), np.diff(np.append(cols, w)))
        if sums.ndim == 3:
            counts = counts[..., None]
        out = ((2 * sums + counts) // (2 * counts)).astype(np.uint8)
    if is_frame:
        return Frame(out, frame.frame_index, frame.timestamp_s)
    return out


def upscale_nearest(arr: np.ndarray, factor: int, shape: tuple[int, int]) -> np.ndarray:
    """Nearest-neighbour upscale of a mask or raster, cropped to ``shape`` (height, width)."""
    factor = check_positive_int(factor, "factor")
    if factor == 1:
        out = arr
    else:
        out = np.repeat(np.repeat(arr, factor, axis=0), factor, axis=1)
    return np.ascontiguousarray(out[: shape[0], : shape[1]])
