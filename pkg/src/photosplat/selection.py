"""Three-tier pixel selection for dense point clouds.

Tracking pixels are high-gradient candidates picked with per-block adaptive
thresholds and non-maximum suppression; extra pixels add one position-only
candidate per uncovered grid cell; gradient-less cells receive fill points at
their centers with inverse depth set to the mean of the k nearest tracked
points. Grid iteration is row-major throughout, so outputs are deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InsufficientTextureError, InvalidArgumentError
from .image import IntensityImage, gradient_magnitude_map

TRACKING_BORDER = 2  # tracking pixels stay at least this many pixels from the border
MIN_CANDIDATES = 50


@dataclass(frozen=True)
class SelectionConfig:
    target_tracking_count: int = 800
    extra_cell_size: int = 8
    gradient_floor: float = 0.004
    fill_neighbor_count: int = 5
    block_size: int = 32

    def __post_init__(self):
        if self.target_tracking_count <= 0 or self.block_size <= 0:
            raise InvalidArgumentError("selection counts must be positive")
        if self.extra_cell_size < 2:
            raise InvalidArgumentError("extra_cell_size must be at least 2")
        if self.fill_neighbor_count < 1:
            raise InvalidArgumentError("fill_neighbor_count must be at least 1")
        if self.gradient_floor <= 0:
            raise InvalidArgumentError("gradient_floor must be positive")


@dataclass
class SelectionResult:
    """Pixel lists as (N, 2) integer (u, v) arrays plus the cell occupancy grid."""

    tracking: np.ndarray
    extra: np.ndarray
    fill: np.ndarray
    occupancy: np.ndarray

    def all_pixels(self) -> list[tuple[int, int]]:
        out = [tuple(p) for p in self.tracking]
        out += [tuple(p) for p in self.extra]
        out += [tuple(p) for p in self.fill]
        return out

    def iter_with_status(self):
        from .odometry import PointStatus

        for p in self.tracking:
            yield (int(p[0]), int(p[1])), PointStatus.POSE_TRACKING
        for p in self.extra:
            yield (int(p[0]), int(p[1])), PointStatus.POSITION_ONLY


def _block_median_map(grad: np.ndarray, block: int) -> np.ndarray:
    """Per-pixel threshold base: the median gradient of the pixel's block."""
    h, w = grad.shape
    out = np.empty_like(grad)
    for y0 in range(0, h, block):
        for x0 in range(0, w, block):
            med = np.median(grad[y0 : y0 + block, x0 : x0 + block])
            out[y0 : y0 + block, x0 : x0 + block] = med
    return out


def _nms(candidates_vu: np.ndarray, grad: np.ndarray, shape: tuple[int, int]) -> np.ndarray:
    """Greedy 3x3 non-maximum suppression, strongest gradient first.

    Ties are broken by row-major pixel order, making the result deterministic.
    """
    if candidates_vu.size == 0:
        return candidates_vu.reshape(0, 2)
    vs, us = candidates_vu[:, 0], candidates_vu[:, 1]
    g = grad[vs, us]
    order = np.lexsort((us, vs, -g))
    h, w = shape
    suppressed = np.zeros((h, w), dtype=bool)
    keep = []
    for i in order:
        v, u = int(vs[i]), int(us[i])
        if suppressed[v, u]:
            continue
        keep.append((v, u))
        suppressed[max(0, v - 1) : v + 2, max(0, u - 1) : u + 2] = True
    return np.array(keep, dtype=np.int64).reshape(-1, 2)


def select_tracking_pixels(
    image: IntensityImage,
    config: SelectionConfig,
    gradient_map: np.ndarray | None = None,
) -> np.ndarray:
    """High-gradient pixels with per-block adaptive thresholds and NMS.

    The per-block threshold is (block median + scale * gradient_floor); the
    scale is bisected (at most 10 evaluations) to steer the selected count
    toward target_tracking_count. Returns (N, 2) integer (u, v), row-major.
    """
    if image.width < 2 * config.block_size or image.height < 2 * config.block_size:
        raise InvalidArgumentError(
            f"image must be at least {2 * config.block_size} pixels per side"
        )
    grad = gradient_magnitude_map(image) if gradient_map is None else gradient_map
    base = _block_median_map(grad, config.block_size)
    margin = np.zeros_like(grad, dtype=bool)
    margin[TRACKING_BORDER:-TRACKING_BORDER, TRACKING_BORDER:-TRACKING_BORDER] = True

    lo, hi = -6.0, 6.0  # log2 of the offset scale

    def candidates(log_scale: float) -> np.ndarray:
        thr = base + (2.0**log_scale) * config.gradient_floor
        mask = (grad > thr) & margin
        return np.argwhere(mask)

    loosest = candidates(lo)
    if loosest.shape[0] < MIN_CANDIDATES:
        raise InsufficientTextureError(
            f"only {loosest.shape[0]} gradient candidates (need {MIN_CANDIDATES})"
        )

    shape = grad.shape
    best_pixels = None
    best_gap = None
    for log_scale in [lo, hi] + [None] * 8:
        if log_scale is None:
            log_scale = 0.5 * (lo + hi)
        kept = _nms(candidates(log_scale), grad, shape)
        gap = abs(kept.shape[0] - config.target_tracking_count)
        if best_gap is None or gap < best_gap:
            best_gap = gap
            best_pixels = kept
        if kept.shape[0] > config.target_tracking_count:
            lo = log_scale
        else:
            hi = log_scale
    pixels_vu = best_pixels
    order = np.lexsort((pixels_vu[:, 1], pixels_vu[:, 0]))
    pixels_vu = pixels_vu[order]
    return pixels_vu[:, ::-1].copy()  # (u, v)


def _cell_grid_shape(width: int, height: int, cell: int) -> tuple[int, int]:
    return (height + cell - 1) // cell, (width + cell - 1) // cell


def select_extra_pixels(
    image: IntensityImage,
    tracking: np.ndarray,
    config: SelectionConfig,
    gradient_map: np.ndarray | None = None,
) -> np.ndarray:
    """One position-only pixel per grid cell that has no tracking pixel.

    Each uncovered cell contributes its highest-gradient pixel, provided that
    gradient reaches the floor. Returns (M, 2) integer (u, v).
    """
    grad = gradient_magnitude_map(image) if gradient_map is None else gradient_map
    cell = config.extra_cell_size
    rows, cols = _cell_grid_shape(image.width, image.height, cell)
    occupied = np.zeros((rows, cols), dtype=bool)
    tracking = np.asarray(tracking).reshape(-1, 2)
    if tracking.size:
        occupied[tracking[:, 1] // cell, tracking[:, 0] // cell] = True
    out = []
    for cy in range(rows):
        for cx in range(cols):
            if occupied[cy, cx]:
                continue
            patch = grad[cy * cell : (cy + 1) * cell, cx * cell : (cx + 1) * cell]
            flat = int(np.argmax(patch))
            if patch.flat[flat] < config.gradient_floor:
                continue
            dy, dx = divmod(flat, patch.shape[1])
            out.append((cx * cell + dx, cy * cell + dy))
    return np.array(out, dtype=np.int64).reshape(-1, 2)


def cell_max_gradients(image: IntensityImage, config: SelectionConfig,
                       gradient_map: np.ndarray | None = None) -> np.ndarray:
    """Max gradient magnitude per grid cell (the border ring reads as zero)."""
    grad = gradient_magnitude_map(image) if gradient_map is None else gradient_map
    cell = config.extra_cell_size
    rows, cols = _cell_grid_shape(image.width, image.height, cell)
    out = np.zeros((rows, cols))
    for cy in range(rows):
        for cx in range(cols):
            out[cy, cx] = grad[cy * cell : (cy + 1) * cell, cx * cell : (cx + 1) * cell].max()
    return out


def fill_gradientless_regions(
    cloud: list,
    image: IntensityImage,
    config: SelectionConfig,
    color_image: np.ndarray | None = None,
    host_frame: int | None = None,
    gradient_map: np.ndarray | None = None,
) -> list:
    """Fill points at the centers of cells whose max gradient is below the floor.

    Each fill point's inverse depth is the arithmetic mean of the k nearest
    (pixel distance) non-fill points' inverse depths; its color is sampled at
    the cell center.
    """
    from .odometry import PointStatus, TrackedPoint

    donors = [p for p in cloud if p.status != PointStatus.GRADIENT_FILL]
    if not donors:
        raise InvalidArgumentError("fill requires a non-empty cloud of tracked points")
    host = host_frame if host_frame is not None else donors[0].host_frame
    cell = config.extra_cell_size
    maxg = cell_max_gradients(image, config, gradient_map)
    du = np.array([p.u for p in donors])
    dv = np.array([p.v for p in donors])
    dd = np.array([p.inverse_depth for p in donors])
    k = min(config.fill_neighbor_count, len(donors))
    out = []
    rows, cols = maxg.shape
    for cy in range(rows):
        for cx in range(cols):
            if maxg[cy, cx] >= config.gradient_floor:
                continue
            u = min(cx * cell + cell // 2, image.width - 1)
            v = min(cy * cell + cell // 2, image.height - 1)
            dist2 = (du - u) ** 2 + (dv - v) ** 2
            nearest = np.argsort(dist2, kind="stable")[:k]
            idp = float(np.mean(dd[nearest]))
            if color_image is not None:
                color = np.asarray(color_image[v, u], dtype=np.float64)
            else:
                g = image.pixels[v, u]
                color = np.array([g, g, g])
            out.append(
                TrackedPoint(
                    host_frame=host, u=float(u), v=float(v),
                    inverse_depth=idp, status=PointStatus.GRADIENT_FILL, color=color,
                )
            )
    return out


def select_pixels(
    image: IntensityImage,
    config: SelectionConfig,
    color=None,
) -> SelectionResult:
    """Tracking plus extra pixels and the resulting cell occupancy (fill is added later,
    once the selected points have depths)."""
    grad = gradient_magnitude_map(image)
    tracking = select_tracking_pixels(image, config, gradient_map=grad)
    extra = select_extra_pixels(image, tracking, config, gradient_map=grad)
    cell = config.extra_cell_size
    rows, cols = _cell_grid_shape(image.width, image.height, cell)
    occupancy = np.zeros((rows, cols), dtype=bool)
    for arr in (tracking, extra):
        if arr.size:
            occupancy[arr[:, 1] // cell, arr[:, 0] // cell] = True
    return SelectionResult(
        tracking=tracking,
        extra=extra,
        fill=np.zeros((0, 2), dtype=np.int64),
        occupancy=occupancy,
    )
