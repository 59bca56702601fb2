"""Tile-based forward rendering and analytic backward pass.

Visible Gaussians are depth-sorted (stable, so ties keep insertion order) and
alpha-blended front to back per pixel:

    alpha_k = opacity_k * exp(-0.5 d^T conic d), clamped to <= 0.99,
    skipped when < 1/255; blending stops once transmittance < 1e-4.

Work is restricted to each Gaussian's support box (the region where alpha can
reach 1/255) through a 16x16-pixel tile binning structure, which keeps the
tiled result equal to a direct per-pixel evaluation up to the early-stop
tolerance. Tiles are processed in a fixed row-major order so accumulation is
deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..camera import PinholeCamera
from ..se3 import Se3Pose
from .model import SplatScene
from .projection import ProjectionBatch, project_scene, project_scene_backward

TILE = 16
ALPHA_CLAMP = 0.99
ALPHA_SKIP = 1.0 / 255.0
T_STOP = 1e-4


@dataclass
class RenderGrads:
    position: np.ndarray
    log_scale: np.ndarray
    rotation: np.ndarray
    opacity_logit: np.ndarray
    color: np.ndarray
    mean2d: np.ndarray  # screen-space position gradient, for densification stats
    visible: np.ndarray  # (N,) bool: binned into at least one tile


def _sorted_visible(batch: ProjectionBatch, camera: PinholeCamera) -> np.ndarray:
    """Indices of renderable Gaussians in ascending depth (stable for ties)."""
    n = len(batch.valid)
    idx = np.nonzero(
        batch.valid
        & (batch.mean2d[:, 0] + batch.radius >= 0)
        & (batch.mean2d[:, 0] - batch.radius <= camera.width - 1)
        & (batch.mean2d[:, 1] + batch.radius >= 0)
        & (batch.mean2d[:, 1] - batch.radius <= camera.height - 1)
    )[0]
    if idx.size == 0:
        return idx
    order = np.argsort(batch.depth[idx], kind="stable")
    return idx[order]


def _tile_bins(batch: ProjectionBatch, order: np.ndarray, camera: PinholeCamera):
    """Per-tile lists of sorted-order positions whose support box overlaps the tile."""
    tiles_x = (camera.width + TILE - 1) // TILE
    tiles_y = (camera.height + TILE - 1) // TILE
    bins = [[] for _ in range(tiles_x * tiles_y)]
    mx = batch.mean2d[order, 0]
    my = batch.mean2d[order, 1]
    r = batch.radius[order]
    tx0 = np.clip(((mx - r) // TILE).astype(int), 0, tiles_x - 1)
    tx1 = np.clip(((mx + r) // TILE).astype(int), 0, tiles_x - 1)
    ty0 = np.clip(((my - r) // TILE).astype(int), 0, tiles_y - 1)
    ty1 = np.clip(((my + r) // TILE).astype(int), 0, tiles_y - 1)
    for k in range(len(order)):
        for ty in range(ty0[k], ty1[k] + 1):
            row = ty * tiles_x
            for tx in range(tx0[k], tx1[k] + 1):
                bins[row + tx].append(k)
    return bins, tiles_x, tiles_y


class _Cast:
    """Per-image copies of the projection outputs in the working precision."""

    def __init__(self, batch: ProjectionBatch, colors: np.ndarray, background, dtype):
        self.mx = batch.mean2d[:, 0].astype(dtype)
        self.my = batch.mean2d[:, 1].astype(dtype)
        self.ca = batch.conic[:, 0, 0].astype(dtype)
        self.cb = batch.conic[:, 0, 1].astype(dtype)
        self.cc = batch.conic[:, 1, 1].astype(dtype)
        self.opacity = batch.opacity.astype(dtype)
        self.colors = colors.astype(dtype)
        self.background = np.asarray(background, dtype=dtype)
        self.dtype = dtype


def _tile_alphas(cast: _Cast, ids, xs, ys):
    """(K, P) alpha matrix for the tile with clamp and skip rules applied."""
    dx = xs[None, :] - cast.mx[ids][:, None]
    dy = ys[None, :] - cast.my[ids][:, None]
    ca = cast.ca[ids][:, None]
    cb = cast.cb[ids][:, None]
    cc = cast.cc[ids][:, None]
    q = ca * dx * dx + 2.0 * cb * dx * dy + cc * dy * dy
    gval = np.exp(-0.5 * q)
    alpha = np.minimum(cast.opacity[ids][:, None] * gval, cast.dtype.type(ALPHA_CLAMP))
    alpha[alpha < ALPHA_SKIP] = 0.0
    return alpha, gval, dx, dy


def _blend(alpha: np.ndarray):
    """Front-to-back accumulation terms for a (K, P) alpha matrix.

    Returns (t_before, active, t_final): transmittance before each Gaussian,
    the blend mask honoring the early-stop rule, and the final transmittance.
    """
    k, p = alpha.shape
    t_after = np.cumprod(1.0 - alpha, axis=0)
    t_before = np.empty_like(t_after)
    t_before[0] = 1.0
    t_before[1:] = t_after[:-1]
    active = t_before >= T_STOP
    stopped = t_after < T_STOP
    any_stop = stopped.any(axis=0)
    first = np.argmax(stopped, axis=0)
    t_final = np.where(any_stop, t_after[first, np.arange(p)], t_after[-1])
    return t_before, active, t_final


@dataclass
class _TileState:
    members: list
    ids: np.ndarray
    alpha: np.ndarray
    gval: np.ndarray
    dx: np.ndarray
    dy: np.ndarray
    t_before: np.ndarray
    counted: np.ndarray
    t_final: np.ndarray
    bounds: tuple  # (y0, y1, x0, x1)


@dataclass
class RenderAux:
    """Forward-pass state reused by the backward pass."""

    batch: object
    order: np.ndarray
    tiles: list
    cast: object = None


def _forward(scene: SplatScene, camera: PinholeCamera, view_pose: Se3Pose,
             keep_aux: bool, dtype=np.float64):
    dtype = np.dtype(dtype)
    h, w = camera.height, camera.width
    image = np.empty((h, w, 3))
    image[:] = scene.background
    transmittance = np.ones((h, w))
    aux = RenderAux(batch=None, order=np.zeros(0, dtype=int), tiles=[], cast=None)
    if len(scene) == 0:
        return image, transmittance, aux

    batch = project_scene(scene, camera, view_pose)
    order = _sorted_visible(batch, camera)
    aux.batch = batch
    aux.order = order
    if order.size == 0:
        return image, transmittance, aux
    bins, tiles_x, tiles_y = _tile_bins(batch, order, camera)
    cast = _Cast(batch, scene.colors, scene.background, dtype)
    aux.cast = cast

    for ty in range(tiles_y):
        y0, y1 = ty * TILE, min((ty + 1) * TILE, h)
        for tx in range(tiles_x):
            members = bins[ty * tiles_x + tx]
            if not members:
                continue
            x0, x1 = tx * TILE, min((tx + 1) * TILE, w)
            ys_grid, xs_grid = np.mgrid[y0:y1, x0:x1]
            xs = xs_grid.ravel().astype(dtype)
            ys = ys_grid.ravel().astype(dtype)
            ids = order[members]
            alpha, gval, dx, dy = _tile_alphas(cast, ids, xs, ys)
            t_before, active, t_final = _blend(alpha)
            counted = (alpha > 0.0) & active
            weight = alpha * t_before * counted
            tile_rgb = weight.T @ cast.colors[ids] + t_final[:, None] * cast.background
            image[y0:y1, x0:x1] = tile_rgb.reshape(y1 - y0, x1 - x0, 3)
            transmittance[y0:y1, x0:x1] = t_final.reshape(y1 - y0, x1 - x0)
            if keep_aux:
                aux.tiles.append(
                    _TileState(
                        members=members, ids=ids, alpha=alpha, gval=gval,
                        dx=dx, dy=dy, t_before=t_before, counted=counted,
                        t_final=t_final, bounds=(y0, y1, x0, x1),
                    )
                )
    return image, transmittance, aux


def render(
    scene: SplatScene,
    camera: PinholeCamera,
    view_pose: Se3Pose,
    dtype=np.float64,
) -> tuple[np.ndarray, np.ndarray]:
    """Render the scene; returns ((H, W, 3) color, (H, W) final transmittance)."""
    image, transmittance, _ = _forward(scene, camera, view_pose, keep_aux=False, dtype=dtype)
    return image, transmittance


def render_with_aux(scene, camera, view_pose, dtype=np.float64):
    """Render and keep the per-tile blending state for a later backward pass."""
    return _forward(scene, camera, view_pose, keep_aux=True, dtype=dtype)


def render_backward(
    scene: SplatScene,
    camera: PinholeCamera,
    view_pose: Se3Pose,
    upstream: np.ndarray,
    aux: RenderAux | None = None,
    dtype=np.float64,
) -> RenderGrads:
    """Analytic gradients of sum(upstream * rendered) for every Gaussian parameter.

    Reuses the forward tile state from `aux` when given, otherwise recomputes
    it; suffix color sums give d(pixel)/d(alpha) without per-pixel contribution
    lists.
    """
    n = len(scene)
    h, w = camera.height, camera.width
    grads = RenderGrads(
        position=np.zeros((n, 3)),
        log_scale=np.zeros((n, 3)),
        rotation=np.zeros((n, 4)),
        opacity_logit=np.zeros(n),
        color=np.zeros((n, 3)),
        mean2d=np.zeros((n, 2)),
        visible=np.zeros(n, dtype=bool),
    )
    if n == 0:
        return grads
    if aux is None:
        _, _, aux = _forward(scene, camera, view_pose, keep_aux=True, dtype=dtype)
    batch = aux.batch
    order = aux.order
    if order.size == 0:
        return grads
    grads.visible[order] = True
    cast = aux.cast
    upstream = np.asarray(upstream, dtype=cast.dtype).reshape(h, w, 3)

    g_mean2d = np.zeros((n, 2))
    g_conic = np.zeros((n, 2, 2))
    g_opacity = np.zeros(n)

    for tile in aux.tiles:
        y0, y1, x0, x1 = tile.bounds
        ids = tile.ids
        up = upstream[y0:y1, x0:x1].reshape(-1, 3)
        alpha = tile.alpha
        counted = tile.counted
        t_before = tile.t_before
        weight = alpha * t_before * counted

        col = cast.colors[ids]  # (K, 3)
        # project everything onto the upstream gradient up front so the
        # suffix sums stay (K, P) instead of (K, P, 3)
        col_up = col @ up.T  # (K, P)
        contrib_up = weight * col_up
        behind_up = (
            contrib_up.sum(axis=0)[None, :]
            - np.cumsum(contrib_up, axis=0)
            + (up @ cast.background)[None, :] * tile.t_final[None, :]
        )

        # d pixel / d alpha_k = T_k * c_k - behind_k / (1 - alpha_k)
        one_minus = np.where(counted, 1.0 - alpha, cast.dtype.type(1.0))
        gl_alpha = np.where(counted, t_before * col_up - behind_up / one_minus, cast.dtype.type(0.0))

        g_col_tile = weight @ up

        # alpha = min(opacity * gval, clamp); clamped region has zero slope
        op = cast.opacity[ids][:, None]
        not_clamped = op * tile.gval < ALPHA_CLAMP
        ga = gl_alpha * not_clamped
        g_op_tile = np.sum(ga * tile.gval, axis=1)
        g_q = -0.5 * tile.gval * (ga * op)

        ca = cast.ca[ids][:, None]
        cb = cast.cb[ids][:, None]
        cc = cast.cc[ids][:, None]
        dx, dy = tile.dx, tile.dy
        gmx = -np.sum(g_q * (2.0 * ca * dx + 2.0 * cb * dy), axis=1)
        gmy = -np.sum(g_q * (2.0 * cb * dx + 2.0 * cc * dy), axis=1)
        gc00 = np.sum(g_q * dx * dx, axis=1)
        gc01 = np.sum(g_q * dx * dy, axis=1)
        gc11 = np.sum(g_q * dy * dy, axis=1)

        # ids are unique within a tile, so indexed += accumulates safely
        g_mean2d[ids, 0] += gmx
        g_mean2d[ids, 1] += gmy
        g_conic[ids, 0, 0] += gc00
        g_conic[ids, 0, 1] += gc01
        g_conic[ids, 1, 0] += gc01
        g_conic[ids, 1, 1] += gc11
        g_opacity[ids] += g_op_tile
        grads.color[ids] += g_col_tile

    # conic = cov2d^-1  =>  d cov2d = -conic @ d conic @ conic
    g_cov2d = -batch.conic @ g_conic @ batch.conic
    g_pos, g_log_scale, g_quat = project_scene_backward(
        batch, scene, camera, g_mean2d, g_cov2d
    )
    opac = batch.opacity
    grads.position = g_pos
    grads.log_scale = g_log_scale
    grads.rotation = g_quat
    grads.opacity_logit = g_opacity * opac * (1.0 - opac)
    grads.mean2d = g_mean2d
    return grads
