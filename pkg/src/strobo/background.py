"""Per-pixel adaptive Gaussian mixture background model.

Each pixel keeps up to ``m_max`` isotropic RGB Gaussians, sorted by weight.
A sample is owned by the heaviest component within ``match_thresh`` squared
standardised distance; every weight then moves by ``alpha * (owned - w) - alpha * c_t``,
components whose weight drops to zero are discarded, and the owner's mean and
variance move with step ``alpha / w``. Unexplained samples spawn a new component
(or replace the lightest one). The background is the smallest weight-ordered
prefix of components holding more than ``1 - c_f`` of the mass; a pixel is
background when that prefix's density at the sample exceeds ``c_thr``.

Two implementations live here: scalar helpers working on one
:class:`PixelMixture` (readable, used for inspection and as the reference),
and :class:`BackgroundModel`, which applies the same recursion to every
pixel of a frame at once with numpy.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from sklearn.base import BaseEstimator

from .exceptions import DimensionMismatch, InvalidArgument, ModelEmpty
from .frame_io import Frame
from .validation import check_in_open_interval, check_positive_int, check_rgb, round_half_away

_LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class ModelParams:
    alpha: float = 0.002
    m_max: int = 4
    sigma0_sq: float = 225.0
    match_thresh: float = 9.0
    c_t: float | None = None  # None means 0.05 * alpha
    c_f: float = 0.1
    c_thr: float = 1e-5
    sigma_min_sq: float = 4.0
    sigma_max_sq: float | None = None  # None means 5 * sigma0_sq

    def __post_init__(self):
        check_in_open_interval(self.alpha, "alpha")
        check_positive_int(self.m_max, "m_max")
        check_in_open_interval(self.c_f, "c_f")
        if self.c_t is None:
            object.__setattr__(self, "c_t", 0.05 * self.alpha)
        if self.sigma_max_sq is None:
            object.__setattr__(self, "sigma_max_sq", 5.0 * self.sigma0_sq)
        for name in ("sigma0_sq", "match_thresh", "c_t", "c_thr", "sigma_min_sq", "sigma_max_sq"):
            if not getattr(self, name) > 0:
                raise InvalidArgument(f"{name} must be positive, got {getattr(self, name)}")
        if self.sigma_min_sq > self.sigma_max_sq:
            raise InvalidArgument("sigma_min_sq exceeds sigma_max_sq")


@dataclass
class GmmComponent:
    weight: float
    mean: np.ndarray
    variance: float

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=np.float64).reshape(3).copy()


@dataclass
class PixelMixture:
    components: list[GmmComponent] = field(default_factory=list)

    def __len__(self):
        return len(self.components)

    def copy(self) -> "PixelMixture":
        return PixelMixture([GmmComponent(c.weight, c.mean, c.variance) for c in self.components])

    @property
    def weights(self) -> np.ndarray:
        return np.array([c.weight for c in self.components], dtype=np.float64)


def gaussian_density(sq_dist, variance):
    """3-D isotropic normal density given the squared distance to the mean."""
    return np.exp(-0.5 * sq_dist / variance - 1.5 * (_LOG_2PI + np.log(variance)))


def mixture_density(mixture: PixelMixture, sample) -> float:
    x = np.asarray(sample, dtype=np.float64)
    total = 0.0
    for c in mixture.components:
        d = x - c.mean
        total += c.weight * float(gaussian_density(np.dot(d, d), c.variance))
    return total


def background_count(weights, c_f: float) -> int:
    """Number of leading components whose cumulative weight first exceeds ``1 - c_f``."""
    running = 0.0
    for b, w in enumerate(weights, start=1):
        running += w
        if running > 1.0 - c_f:
            return b
    return len(weights)


def background_density(mixture: PixelMixture, sample, c_f: float) -> float:
    b = background_count(mixture.weights, c_f)
    return mixture_density(PixelMixture(mixture.components[:b]), sample)


def classify_pixel(mixture: PixelMixture, sample, params: ModelParams) -> bool:
    """True for foreground. An empty mixture has zero density and is foreground."""
    return not background_density(mixture, sample, params.c_f) > params.c_thr


def update_pixel(mixture: PixelMixture, sample, params: ModelParams) -> tuple[PixelMixture, bool]:
    """One recursive update of a single pixel. Returns (new mixture, was foreground before update)."""
    is_fg = classify_pixel(mixture, sample, params)
    x = np.asarray(sample, dtype=np.float64)
    a = params.alpha
    comps = mixture.copy().components

    owner = None
    for m, c in enumerate(comps):
        d = x - c.mean
        if np.dot(d, d) / c.variance < params.match_thresh:
            owner = m
            break  # sorted by weight, so the first match is the heaviest

    for m, c in enumerate(comps):
        o = 1.0 if m == owner else 0.0
        c.weight = c.weight + a * (o - c.weight) - a * params.c_t
    if owner is not None:
        c = comps[owner]
        d = x - c.mean
        rho = a / c.weight
        sq = np.dot(d, d)
        c.mean = c.mean + rho * d
        c.variance = min(max(c.variance + rho * (sq / 3.0 - c.variance), params.sigma_min_sq), params.sigma_max_sq)
    comps = [c for c in comps if c.weight > 0]

    if owner is None:
        fresh = GmmComponent(a, x, params.sigma0_sq)
        if len(comps) < params.m_max:
            comps.append(fresh)
        else:
            comps[-1] = fresh

    total = sum(c.weight for c in comps)
    for c in comps:
        c.weight = c.weight / total
    comps.sort(key=lambda c: -c.weight)
    return PixelMixture(comps), is_fg


class BackgroundModel(BaseEstimator):
    """Online Gaussian-mixture background estimator over whole frames.

    Parameters mirror :class:`ModelParams`. The model grid is sized by
    :meth:`initialize` or lazily by the first frame passed to :meth:`partial_fit`.

    Attributes
    ----------
    weights_ : ndarray of shape (n_pixels, m_max)
        Component weights, zero in unused slots; each row sorted descending.
    means_ : ndarray of shape (n_pixels, m_max, 3)
    variances_ : ndarray of shape (n_pixels, m_max)
    n_active_ : ndarray of shape (n_pixels,)
        Number of live components per pixel.
    frames_seen_ : int
    """

    def __init__(
        self,
        alpha=0.002,
        m_max=4,
        sigma0_sq=225.0,
        match_thresh=9.0,
        c_t=None,
        c_f=0.1,
        c_thr=1e-5,
        sigma_min_sq=4.0,
        sigma_max_sq=None,
    ):
        self.alpha = alpha
        self.m_max = m_max
        self.sigma0_sq = sigma0_sq
        self.match_thresh = match_thresh
        self.c_t = c_t
        self.c_f = c_f
        self.c_thr = c_thr
        self.sigma_min_sq = sigma_min_sq
        self.sigma_max_sq = sigma_max_sq

    @property
    def params(self) -> ModelParams:
        return ModelParams(**self.get_params())

    @classmethod
    def from_params(cls, params: ModelParams) -> "BackgroundModel":
        return cls(**{k: getattr(params, k) for k in cls._get_param_names()})

    def initialize(self, width: int, height: int) -> "BackgroundModel":
        width = check_positive_int(width, "width")
        height = check_positive_int(height, "height")
        p = self.params
        self._p = p
        self.width_, self.height_ = width, height
        n = width * height
        self.weights_ = np.zeros((n, p.m_max))
        self.means_ = np.zeros((n, p.m_max, 3))
        self.variances_ = np.full((n, p.m_max), p.sigma0_sq)
        self.n_active_ = np.zeros(n, dtype=np.int64)
        self.frames_seen_ = 0
        return self

    def _check_frame(self, frame) -> np.ndarray:
        pixels = frame.pixels if isinstance(frame, Frame) else check_rgb(frame)
        if not hasattr(self, "weights_"):
            self.initialize(pixels.shape[1], pixels.shape[0])
        if pixels.shape[:2] != (self.height_, self.width_):
            raise DimensionMismatch(
                f"frame is {pixels.shape[1]}x{pixels.shape[0]}, model is {self.width_}x{self.height_}"
            )
        return pixels.reshape(-1, 3).astype(np.float64)

    # -- classification ------------------------------------------------------

    def _active(self) -> np.ndarray:
        return np.arange(self._p.m_max)[None, :] < self.n_active_[:, None]

    def _foreground(self, x: np.ndarray) -> np.ndarray:
        p = self._p
        w = self.weights_
        # component m is in the background prefix iff the mass before it has not yet exceeded 1 - c_f
        prefix_ok = np.cumsum(w, axis=1)[:, :-1] <= 1.0 - p.c_f
        in_bg = self._active() & np.concatenate([np.ones((w.shape[0], 1), bool), prefix_ok], axis=1)
        d = x[:, None, :] - self.means_
        sq = np.einsum("nmc,nmc->nm", d, d)
        dens = np.where(in_bg, w * gaussian_density(sq, self.variances_), 0.0)
        total = np.zeros(w.shape[0])
        for m in range(p.m_max):
            total = total + dens[:, m]
        return ~(total > p.c_thr)

    def predict(self, frame) -> np.ndarray:
        """Foreground mask for ``frame`` against the current model, without updating it."""
        x = self._check_frame(frame)
        return self._foreground(x).reshape(self.height_, self.width_)

    # -- update --------------------------------------------------------------

    def _sort(self) -> None:
        key = np.where(self._active(), -self.weights_, np.inf)
        order = np.argsort(key, axis=1, kind="stable")
        self.weights_ = np.take_along_axis(self.weights_, order, axis=1)
        self.variances_ = np.take_along_axis(self.variances_, order, axis=1)
        self.means_ = np.take_along_axis(self.means_, order[:, :, None], axis=1)

    def _update(self, x: np.ndarray) -> None:
        p = self._p
        a = p.alpha
        n, M = self.weights_.shape
        rows = np.arange(n)
        active = self._active()

        d = x[:, None, :] - self.means_
        sq = np.einsum("nmc,nmc->nm", d, d)
        matched = active & (sq / self.variances_ < p.match_thresh)
        has_owner = matched.any(axis=1)
        owner = np.argmax(matched, axis=1)

        own = np.zeros((n, M))
        own[rows[has_owner], owner[has_owner]] = 1.0
        w = np.where(active, self.weights_ + a * (own - self.weights_) - a * p.c_t, 0.0)

        r = rows[has_owner]
        o = owner[has_owner]
        rho = a / w[r, o]
        self.means_[r, o] = self.means_[r, o] + rho[:, None] * d[r, o]
        var = self.variances_[r, o]
        self.variances_[r, o] = np.minimum(np.maximum(var + rho * (sq[r, o] / 3.0 - var), p.sigma_min_sq), p.sigma_max_sq)

        alive = active & (w > 0)
        self.weights_ = np.where(alive, w, 0.0)
        self.n_active_ = alive.sum(axis=1)
        self._sort()

        r = rows[~has_owner]
        slot = np.minimum(self.n_active_[r], M - 1)
        self.weights_[r, slot] = a
        self.means_[r, slot] = x[r]
        self.variances_[r, slot] = p.sigma0_sq
        self.n_active_[r] = slot + 1

        self.weights_ = self.weights_ / self.weights_.sum(axis=1, keepdims=True)
        self._sort()

    def apply(self, frame) -> np.ndarray:
        """Classify every pixel against the pre-update model, then update. Returns the raw mask."""
        x = self._check_frame(frame)
        fg = self._foreground(x)
        self._update(x)
        self.frames_seen_ += 1
        return fg.reshape(self.height_, self.width_)

    process_frame = apply

    def partial_fit(self, frame, y=None) -> "BackgroundModel":
        self.apply(frame)
        return self

    def fit(self, frames, y=None) -> "BackgroundModel":
        """Learn from an iterable of frames, starting from a fresh model."""
        for attr in ("weights_", "means_", "variances_", "n_active_", "frames_seen_"):
            self.__dict__.pop(attr, None)
        for frame in frames:
            self.partial_fit(frame)
        if not hasattr(self, "weights_"):
            raise ModelEmpty("fit() received no frames")
        return self

    # -- inspection ----------------------------------------------------------

    def background_image(self) -> np.ndarray:
        """Mean of each pixel's heaviest component as an ``(H, W, 3)`` uint8 image."""
        if getattr(self, "frames_seen_", 0) == 0:
            raise ModelEmpty("no frames seen yet")
        rgb = np.where(self.n_active_[:, None] > 0, self.means_[:, 0], 0.0)
        rgb = np.clip(round_half_away(rgb), 0, 255).astype(np.uint8)
        return rgb.reshape(self.height_, self.width_, 3)

    def mixture_at(self, x: int, y: int) -> PixelMixture:
        i = y * self.width_ + x
        k = int(self.n_active_[i])
        return PixelMixture(
            [GmmComponent(self.weights_[i, m], self.means_[i, m], self.variances_[i, m]) for m in range(k)]
        )

    def set_mixture(self, x: int, y: int, mixture: PixelMixture) -> None:
        i = y * self.width_ + x
        k = len(mixture)
        if k > self._p.m_max:
            raise InvalidArgument("mixture has more components than m_max")
        self.weights_[i] = 0.0
        self.variances_[i] = self._p.sigma0_sq
        for m, c in enumerate(mixture.components):
            self.weights_[i, m] = c.weight
            self.means_[i, m] = c.mean
            self.variances_[i, m] = c.variance
        self.n_active_[i] = k


def init_model(width: int, height: int, params: ModelParams | None = None) -> BackgroundModel:
    params = params or ModelParams()
    return BackgroundModel.from_params(params).initialize(width, height)


def with_params(params: ModelParams, **changes) -> ModelParams:
    return replace(params, **changes)
