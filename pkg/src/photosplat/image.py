"""Scalar intensity images with sub-pixel sampling, gradients, and pyramids.

Pixels are stored row-major as float64 in [0, 1]; the sample functions accept
scalars or numpy arrays of coordinates and broadcast accordingly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError, OutOfBoundsError

MAX_PYRAMID_LEVELS = 6


@dataclass(frozen=True)
class IntensityImage:
    pixels: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.pixels, dtype=np.float64)
        if arr.ndim != 2 or arr.size == 0:
            raise InvalidArgumentError("intensity image must be a non-empty 2-D array")
        if not np.all(np.isfinite(arr)):
            raise InvalidArgumentError("intensities must be finite")
        if arr.min() < 0.0 or arr.max() > 1.0:
            raise InvalidArgumentError("intensities must lie in [0, 1]")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "pixels", arr)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]


@dataclass(frozen=True)
class ImagePyramid:
    """Ordered levels, finest first; each coarser level floor-halves the dimensions."""

    levels: tuple[IntensityImage, ...]

    def __post_init__(self):
        levels = tuple(self.levels)
        if not 1 <= len(levels) <= MAX_PYRAMID_LEVELS:
            raise InvalidArgumentError(f"pyramid must have 1..{MAX_PYRAMID_LEVELS} levels")
        for fine, coarse in zip(levels, levels[1:]):
            if coarse.width != fine.width // 2 or coarse.height != fine.height // 2:
                raise InvalidArgumentError("pyramid level sizes must floor-halve")
        object.__setattr__(self, "levels", levels)

    def __len__(self) -> int:
        return len(self.levels)

    def __getitem__(self, level: int) -> IntensityImage:
        return self.levels[level]


def _bilinear_raw(arr: np.ndarray, u, v):
    """Bilinear interpolation without bounds checks; clamps the base cell at the far edge."""
    h, w = arr.shape[:2]
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    x0 = np.clip(np.floor(u).astype(np.int64), 0, max(w - 2, 0))
    y0 = np.clip(np.floor(v).astype(np.int64), 0, max(h - 2, 0))
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fu = u - x0
    fv = v - y0
    i00 = arr[y0, x0]
    i10 = arr[y0, x1]
    i01 = arr[y1, x0]
    i11 = arr[y1, x1]
    top = i00 + (i10 - i00) * fu
    bot = i01 + (i11 - i01) * fu
    return top + (bot - top) * fv


def _bilinear_raw_with_gradient(arr: np.ndarray, u, v):
    """Value plus the exact derivative of the bilinear interpolant inside its cell."""
    h, w = arr.shape[:2]
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    x0 = np.clip(np.floor(u).astype(np.int64), 0, max(w - 2, 0))
    y0 = np.clip(np.floor(v).astype(np.int64), 0, max(h - 2, 0))
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fu = u - x0
    fv = v - y0
    i00 = arr[y0, x0]
    i10 = arr[y0, x1]
    i01 = arr[y1, x0]
    i11 = arr[y1, x1]
    value = (
        i00 * (1 - fu) * (1 - fv) + i10 * fu * (1 - fv) + i01 * (1 - fu) * fv + i11 * fu * fv
    )
    gu = (i10 - i00) * (1 - fv) + (i11 - i01) * fv
    gv = (i01 - i00) * (1 - fu) + (i11 - i10) * fu
    return value, gu, gv


def bilinear_sample(image: IntensityImage, u, v):
    """Bilinear interpolation of the four surrounding pixels; exact at lattice points."""
    w, h = image.width, image.height
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if np.any(u < 0) or np.any(u > w - 1) or np.any(v < 0) or np.any(v > h - 1):
        raise OutOfBoundsError(f"sample outside [0, {w - 1}] x [0, {h - 1}]")
    out = _bilinear_raw(image.pixels, u, v)
    return float(out) if out.ndim == 0 else out


def image_gradient(image: IntensityImage, u, v):
    """Central differences (one-pixel step) of the bilinearly sampled intensity."""
    w, h = image.width, image.height
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if np.any(u < 1) or np.any(u > w - 2) or np.any(v < 1) or np.any(v > h - 2):
        raise OutOfBoundsError("gradient requires coordinates at least 1 pixel from the border")
    arr = image.pixels
    gx = 0.5 * (_bilinear_raw(arr, u + 1.0, v) - _bilinear_raw(arr, u - 1.0, v))
    gy = 0.5 * (_bilinear_raw(arr, u, v + 1.0) - _bilinear_raw(arr, u, v - 1.0))
    if gx.ndim == 0:
        return float(gx), float(gy)
    return gx, gy


def gradient_magnitude_map(image: IntensityImage) -> np.ndarray:
    """Per-pixel central-difference gradient magnitude; zero on the one-pixel border."""
    p = image.pixels
    gx = np.zeros_like(p)
    gy = np.zeros_like(p)
    if image.width >= 3:
        gx[:, 1:-1] = 0.5 * (p[:, 2:] - p[:, :-2])
    if image.height >= 3:
        gy[1:-1, :] = 0.5 * (p[2:, :] - p[:-2, :])
    mag = np.hypot(gx, gy)
    mag[0, :] = 0.0
    mag[-1, :] = 0.0
    mag[:, 0] = 0.0
    mag[:, -1] = 0.0
    return mag


def _box_downsample(arr: np.ndarray) -> np.ndarray:
    h2, w2 = arr.shape[0] // 2, arr.shape[1] // 2
    a = arr[: 2 * h2, : 2 * w2]
    return 0.25 * (a[0::2, 0::2] + a[1::2, 0::2] + a[0::2, 1::2] + a[1::2, 1::2])


def build_pyramid(image: IntensityImage, levels: int) -> ImagePyramid:
    """Repeated 2x2 box-filter downsampling, `levels` levels including the input."""
    if not 1 <= levels <= MAX_PYRAMID_LEVELS:
        raise InvalidArgumentError(f"levels must be in 1..{MAX_PYRAMID_LEVELS}")
    min_side = 2 ** (levels - 1)
    if image.width < min_side or image.height < min_side:
        raise InvalidArgumentError(
            f"image {image.width}x{image.height} too small for {levels} pyramid levels"
        )
    out = [image]
    arr = image.pixels
    for _ in range(levels - 1):
        arr = _box_downsample(arr)
        out.append(IntensityImage(arr))
    return ImagePyramid(tuple(out))
