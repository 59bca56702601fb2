"""Direct photometric frame tracking.

Relative pose, target gain/offset, and per-point inverse depths are estimated
by minimizing Huber-robustified intensity residuals

    r = (I_j[p_j] - b_j) - (s_j * a_j) / (s_i * a_i) * (I_i[p_i] - b_i)

coarse-to-fine over an image pyramid. Frame i hosts the tracked points, frame
j is the target; s is the (known) exposure, a and b the estimated gain and
offset. Only POSE_TRACKING points constrain poses; POSITION_ONLY and
GRADIENT_FILL points only ever have their inverse depth refined.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum, IntEnum

import numpy as np

from .camera import PinholeCamera
from .errors import InvalidArgumentError, NotVisibleError, TrackingLostError
from .image import (
    ImagePyramid,
    IntensityImage,
    _bilinear_raw,
    _bilinear_raw_with_gradient,
    build_pyramid,
)
from .se3 import Se3Pose, se3_exp
from .selection import SelectionConfig

MIN_INVERSE_DEPTH = 1e-4
MAX_INVERSE_DEPTH = 1e4
SAMPLE_MARGIN = 0.6  # warped samples stay this far inside the image
GROWTH_FACTOR = 1.25  # energy growth beyond p/count noise bound counts toward divergence


class PointStatus(IntEnum):
    POSE_TRACKING = 0
    POSITION_ONLY = 1
    GRADIENT_FILL = 2


class DepthRefineStatus(Enum):
    UPDATED = "updated"
    UNCHANGED = "unchanged"
    CLAMPED = "clamped"


@dataclass
class TrackedPoint:
    """A host-frame pixel with inverse depth; mutable because depth gets refined."""

    host_frame: int
    u: float
    v: float
    inverse_depth: float
    status: PointStatus
    color: np.ndarray = field(default_factory=lambda: np.full(3, 0.5))

    def __post_init__(self):
        if not MIN_INVERSE_DEPTH < self.inverse_depth < MAX_INVERSE_DEPTH:
            raise InvalidArgumentError(
                f"inverse depth {self.inverse_depth} outside "
                f"({MIN_INVERSE_DEPTH}, {MAX_INVERSE_DEPTH})"
            )
        self.color = np.asarray(self.color, dtype=np.float64).reshape(3)


@dataclass
class PhotometricFrame:
    """Grayscale pyramid plus exposure/gain/offset and the estimated pose."""

    id: int
    pyramid: ImagePyramid
    color: np.ndarray | None = None
    exposure: float = 1.0
    affine_a: float = 1.0
    affine_b: float = 0.0
    pose: Se3Pose = field(default_factory=Se3Pose.identity)

    def __post_init__(self):
        if self.exposure <= 0:
            raise InvalidArgumentError("exposure must be positive")
        if self.affine_a <= 0:
            raise InvalidArgumentError("gain a must be positive")
        if not (math.isfinite(self.affine_b) and abs(self.affine_b) < 1.0):
            raise InvalidArgumentError("offset b must be finite with |b| < 1")

    @property
    def image(self) -> IntensityImage:
        return self.pyramid[0]


@dataclass(frozen=True)
class PhotometricEnergy:
    total: float
    residual_count: int
    huber_threshold: float


@dataclass(frozen=True)
class OdometryConfig:
    keyframe_interval: int = 5
    refine_window: int = 3
    pyramid_levels: int = 4
    huber_threshold: float = 0.03
    max_iterations_per_level: int = 30
    twist_convergence: float = 1e-7
    damping_initial: float = 1.0
    damping_increase: float = 4.0
    damping_decrease: float = 0.5
    damping_floor: float = 1e-7
    min_visible_points: int = 50
    max_consecutive_rejects: int = 5
    init_inverse_depth: float = 1.0
    depth_refine_levels: tuple[int, ...] = (2, 1, 0)
    depth_refine_iterations: int = 8
    selection: SelectionConfig = field(default_factory=SelectionConfig)


@dataclass(frozen=True)
class TrackResult:
    pose: Se3Pose  # target camera-to-world
    relative: Se3Pose  # host camera coordinates -> target camera coordinates
    affine_a: float
    affine_b: float
    energy: PhotometricEnergy


def huber_weights(r: np.ndarray, k: float) -> np.ndarray:
    a = np.abs(r)
    w = np.ones_like(r)
    big = a > k
    w[big] = k / a[big]
    return w


def huber_energy(r: np.ndarray, k: float) -> float:
    a = np.abs(r)
    small = a <= k
    return float(np.sum(0.5 * r[small] ** 2) + np.sum(k * (a[~small] - 0.5 * k)))


def _huber_rho(r: float, k: float) -> float:
    a = abs(r)
    return 0.5 * r * r if a <= k else k * (a - 0.5 * k)


def _host_rays(us: np.ndarray, vs: np.ndarray, camera: PinholeCamera) -> np.ndarray:
    return np.stack(
        [(us - camera.cx) / camera.fx, (vs - camera.cy) / camera.fy, np.ones_like(us)], axis=1
    )


def _level_coords(us, vs, level: int):
    s = float(2**level)
    off = (s - 1.0) / 2.0
    return (np.asarray(us) - off) / s, (np.asarray(vs) - off) / s


def relative_transform(host: PhotometricFrame, target: PhotometricFrame) -> Se3Pose:
    """Transform taking host camera coordinates to target camera coordinates."""
    return target.pose.inverse() @ host.pose


def gain_ratio(host: PhotometricFrame, target: PhotometricFrame) -> float:
    return (target.exposure * target.affine_a) / (host.exposure * host.affine_a)


def warp_point(
    point: TrackedPoint,
    host: PhotometricFrame,
    target: PhotometricFrame,
    camera: PinholeCamera,
) -> tuple[float, float, float]:
    """Reproject a host pixel into the target frame; returns (u, v, new inverse depth)."""
    if point.inverse_depth <= 0:
        raise InvalidArgumentError("point inverse depth must be positive")
    rel = relative_transform(host, target)
    ray = np.array([(point.u - camera.cx) / camera.fx, (point.v - camera.cy) / camera.fy, 1.0])
    xt = rel.apply(ray / point.inverse_depth)
    if xt[2] <= 1e-9:
        raise NotVisibleError("warped point behind the target camera")
    u = camera.fx * xt[0] / xt[2] + camera.cx
    v = camera.fy * xt[1] / xt[2] + camera.cy
    if not (0.0 <= u <= camera.width - 1 and 0.0 <= v <= camera.height - 1):
        raise NotVisibleError("warped point outside the target frame")
    return float(u), float(v), float(1.0 / xt[2])


def photometric_residual(
    point: TrackedPoint,
    host: PhotometricFrame,
    target: PhotometricFrame,
    camera: PinholeCamera,
) -> float:
    """Gain/offset-corrected intensity difference at the warped location."""
    u_j, v_j, _ = warp_point(point, host, target, camera)
    i_j = float(_bilinear_raw(target.image.pixels, u_j, v_j))
    i_i = float(_bilinear_raw(host.image.pixels, point.u, point.v))
    return (i_j - target.affine_b) - gain_ratio(host, target) * (i_i - host.affine_b)


@dataclass
class _HostLevel:
    intensities: np.ndarray
    valid: np.ndarray


def _prepare_host_levels(host: PhotometricFrame, us, vs) -> list[_HostLevel]:
    out = []
    for level in range(len(host.pyramid)):
        img = host.pyramid[level]
        ul, vl = _level_coords(us, vs, level)
        valid = (ul >= 0.0) & (ul <= img.width - 1) & (vl >= 0.0) & (vl <= img.height - 1)
        vals = np.zeros(len(us))
        if np.any(valid):
            vals[valid] = _bilinear_raw(img.pixels, ul[valid], vl[valid])
        out.append(_HostLevel(intensities=vals, valid=valid))
    return out


def _level_residuals(
    rel: Se3Pose,
    log_a: float,
    b_j: float,
    rays: np.ndarray,
    idepths: np.ndarray,
    host_level: _HostLevel,
    host: PhotometricFrame,
    target_img: IntensityImage,
    cam_l: PinholeCamera,
    huber: float,
    s_j: float,
    with_jacobian: bool = True,
):
    """Residuals (and optionally 8-column Jacobians) for the visible subset at one level."""
    xt = rays / idepths[:, None] @ rel.rotation_matrix().T + rel.translation
    z = xt[:, 2]
    vis = host_level.valid & (z > 1e-9)
    zs = np.where(z > 1e-9, z, 1.0)
    u = cam_l.fx * xt[:, 0] / zs + cam_l.cx
    v = cam_l.fy * xt[:, 1] / zs + cam_l.cy
    vis &= (
        (u >= SAMPLE_MARGIN)
        & (u <= cam_l.width - 1 - SAMPLE_MARGIN)
        & (v >= SAMPLE_MARGIN)
        & (v <= cam_l.height - 1 - SAMPLE_MARGIN)
    )
    idx = np.nonzero(vis)[0]
    if idx.size == 0:
        return np.zeros(0), np.zeros((0, 8)), idx, 0.0
    host_i = host_level.intensities[idx]
    rho = (s_j / host.exposure) * math.exp(log_a) if log_a != 0.0 else s_j / host.exposure
    if with_jacobian:
        i_j, gu, gv = _bilinear_raw_with_gradient(target_img.pixels, u[idx], v[idx])
    else:
        i_j = _bilinear_raw(target_img.pixels, u[idx], v[idx])
    r = (i_j - b_j) - rho * (host_i - host.affine_b)
    if not with_jacobian:
        return r, None, idx, huber_energy(r, huber)
    x, y = xt[idx, 0], xt[idx, 1]
    zi = 1.0 / z[idx]
    gxc = np.stack(
        [
            gu * cam_l.fx * zi,
            gv * cam_l.fy * zi,
            -(gu * cam_l.fx * x + gv * cam_l.fy * y) * zi * zi,
        ],
        axis=1,
    )
    jac = np.empty((idx.size, 8))
    jac[:, 0:3] = gxc
    jac[:, 3:6] = np.cross(xt[idx], gxc)
    jac[:, 6] = -rho * (host_i - host.affine_b)
    jac[:, 7] = -1.0
    return r, jac, idx, huber_energy(r, huber)


def track_frame(
    target: PhotometricFrame,
    reference: PhotometricFrame,
    points: list[TrackedPoint],
    camera: PinholeCamera,
    initial_guess: Se3Pose | None = None,
    config: OdometryConfig | None = None,
    iteration_callback=None,
) -> TrackResult:
    """Coarse-to-fine damped Gauss-Newton over [twist(6), log a_j, b_j].

    `initial_guess` is the starting host-to-target relative transform. A step
    is accepted only if the Huber energy decreases; `iteration_callback`,
    when given, receives (level, energy) after every accepted step.

    If the pyramid descent ends with a higher finest-level energy than the
    initial state (coarse-level aliasing), the solver falls back to refining
    the initial state over the fine levels only and keeps the better result.
    """
    cfg = config or OdometryConfig()
    tracking = [p for p in points if p.status == PointStatus.POSE_TRACKING]
    if not tracking:
        raise TrackingLostError("no pose-tracking points supplied", frame_index=target.id)
    us = np.array([p.u for p in tracking])
    vs = np.array([p.v for p in tracking])
    idepths = np.array([p.inverse_depth for p in tracking])
    rays = _host_rays(us, vs, camera)
    host_levels = _prepare_host_levels(reference, us, vs)

    # the gain is tracked as a log offset from the reference gain so the
    # do-nothing state has a ratio of exactly 1
    init_state = (
        initial_guess if initial_guess is not None else Se3Pose.identity(),
        0.0,
        reference.affine_b,
    )
    s_j = target.exposure
    n_levels = min(len(reference.pyramid), len(target.pyramid))

    def energy_at(state, level):
        """Mean Huber energy per visible residual (comparable across visibility sets)."""
        rel_s, la_s, b_s = state
        _, _, idx, e = _level_residuals(
            rel_s, la_s, b_s, rays, idepths, host_levels[level], reference,
            target.pyramid[level], camera.scaled(level), cfg.huber_threshold, s_j,
            with_jacobian=False,
        )
        return e / idx.size if idx.size >= cfg.min_visible_points else math.inf

    def optimize(levels, state):
        rel, log_a, b_j = state
        for level in levels:
            cam_l = camera.scaled(level)
            target_img = target.pyramid[level]
            host_level = host_levels[level]
            lam = cfg.damping_initial
            grow_rejects = 0  # consecutive attempts with material energy growth
            stagnant_rejects = 0  # consecutive attempts at the noise floor
            for _ in range(cfg.max_iterations_per_level):
                r, jac, idx, energy = _level_residuals(
                    rel, log_a, b_j, rays, idepths, host_level, reference,
                    target_img, cam_l, cfg.huber_threshold, s_j,
                )
                if idx.size < cfg.min_visible_points:
                    raise TrackingLostError(
                        f"only {idx.size} visible tracking points at level {level}",
                        frame_index=target.id,
                    )
                energy /= idx.size  # mean per residual: sums are not comparable
                                    # when a step changes the visible set
                w = huber_weights(r, cfg.huber_threshold)
                jw = jac * w[:, None]
                hess = jw.T @ jac
                grad = jw.T @ r
                converged = False
                accepted = False
                while True:
                    damped = hess + lam * np.diag(np.diag(hess)) + 1e-12 * np.eye(8)
                    try:
                        delta = np.linalg.solve(damped, -grad)
                    except np.linalg.LinAlgError:
                        delta = np.linalg.lstsq(damped, -grad, rcond=None)[0]
                    if float(np.linalg.norm(delta[:6])) < cfg.twist_convergence:
                        converged = True
                        break
                    rel_t = se3_exp(delta[:6]) @ rel
                    la_t = log_a + float(delta[6])
                    b_t = float(np.clip(b_j + delta[7], -0.999, 0.999))
                    _, _, idx_t, e_t = _level_residuals(
                        rel_t, la_t, b_t, rays, idepths, host_level, reference,
                        target_img, cam_l, cfg.huber_threshold, s_j, with_jacobian=False,
                    )
                    e_t = e_t / idx_t.size if idx_t.size else math.inf
                    if e_t < energy and idx_t.size >= cfg.min_visible_points:
                        rel, log_a, b_j = rel_t, la_t, b_t
                        lam = max(lam * cfg.damping_decrease, cfg.damping_floor)
                        grow_rejects = 0
                        stagnant_rejects = 0
                        accepted = True
                        if iteration_callback is not None:
                            iteration_callback(level, e_t)
                        break
                    lam *= cfg.damping_increase
                    if e_t > GROWTH_FACTOR * energy + 1e-15 or idx_t.size < cfg.min_visible_points:
                        grow_rejects += 1
                        stagnant_rejects = 0
                        if grow_rejects >= cfg.max_consecutive_rejects:
                            raise TrackingLostError(
                                f"diverged at level {level}: energy grew on "
                                f"{grow_rejects} consecutive damped attempts",
                                frame_index=target.id,
                            )
                    else:
                        # no improvement but no material growth: the quadratic
                        # model bottomed out on the interpolation noise floor
                        stagnant_rejects += 1
                        if stagnant_rejects >= cfg.max_consecutive_rejects:
                            converged = True
                            break
                if converged or not accepted:
                    break
        return rel, log_a, b_j

    init_energy = energy_at(init_state, 0)
    full_levels = list(range(n_levels - 1, -1, -1))
    fine_levels = list(range(min(1, n_levels - 1), -1, -1))
    state = None
    state_energy = math.inf
    try:
        state = optimize(full_levels, init_state)
        state_energy = energy_at(state, 0)
    except TrackingLostError:
        state = None
    if state is None or state_energy > init_energy:
        # coarse levels walked into an aliased basin; retry fine-only
        fallback = optimize(fine_levels, init_state)
        fb_energy = energy_at(fallback, 0)
        if state is None or fb_energy < state_energy:
            state, state_energy = fallback, fb_energy
    rel, log_a, b_j = state

    r, _, idx, total = _level_residuals(
        rel, log_a, b_j, rays, idepths, host_levels[0], reference,
        target.pyramid[0], camera, cfg.huber_threshold, s_j, with_jacobian=False,
    )
    if idx.size < cfg.min_visible_points:
        raise TrackingLostError(
            f"only {idx.size} visible tracking points at the finest level",
            frame_index=target.id,
        )
    energy = PhotometricEnergy(
        total=total, residual_count=int(idx.size), huber_threshold=cfg.huber_threshold
    )
    return TrackResult(
        pose=reference.pose @ rel.inverse(),
        relative=rel,
        affine_a=reference.affine_a * math.exp(log_a),
        affine_b=b_j,
        energy=energy,
    )


def residual_jacobian(
    point: TrackedPoint,
    host: PhotometricFrame,
    target: PhotometricFrame,
    camera: PinholeCamera,
) -> np.ndarray:
    """Analytic d r / d [twist(6), log a_j, b_j, inverse_depth] for one point at level 0.

    The twist perturbs the host-to-target transform on the left; the image
    derivative is the exact derivative of the bilinear interpolant.
    """
    rel = relative_transform(host, target)
    ray = np.array([(point.u - camera.cx) / camera.fx, (point.v - camera.cy) / camera.fy, 1.0])
    xt = rel.apply(ray / point.inverse_depth)
    z = xt[2]
    if z <= 1e-9:
        raise NotVisibleError("point behind target camera")
    u = camera.fx * xt[0] / z + camera.cx
    v = camera.fy * xt[1] / z + camera.cy
    _, gu, gv = _bilinear_raw_with_gradient(target.image.pixels, u, v)
    gu, gv = float(gu), float(gv)
    zi = 1.0 / z
    gxc = np.array(
        [
            gu * camera.fx * zi,
            gv * camera.fy * zi,
            -(gu * camera.fx * xt[0] + gv * camera.fy * xt[1]) * zi * zi,
        ]
    )
    host_i = float(_bilinear_raw(host.image.pixels, point.u, point.v))
    rho = gain_ratio(host, target)
    jac = np.zeros(9)
    jac[0:3] = gxc
    jac[3:6] = np.cross(xt, gxc)
    jac[6] = -rho * (host_i - host.affine_b)
    jac[7] = -1.0
    jac[8] = gxc @ (-(xt - rel.translation) / point.inverse_depth)
    return jac


def refine_inverse_depth(
    point: TrackedPoint,
    host: PhotometricFrame,
    targets: list[PhotometricFrame],
    camera: PinholeCamera,
    config: OdometryConfig | None = None,
    levels: tuple[int, ...] = (0,),
) -> tuple[float, DepthRefineStatus]:
    """1-D Gauss-Newton on inverse depth against one or more posed targets.

    Returns the refined inverse depth and a status flag; the point is not
    mutated. A zero Jacobian (no visibility, zero baseline, or a textureless
    neighborhood) leaves the depth unchanged.
    """
    if not targets:
        raise InvalidArgumentError("at least one target frame is required")
    cfg = config or OdometryConfig()
    d = float(point.inverse_depth)
    ray = np.array([(point.u - camera.cx) / camera.fx, (point.v - camera.cy) / camera.fy, 1.0])
    touched = False
    clamped = False
    for level in levels:
        if level >= len(host.pyramid):
            continue
        cam_l = camera.scaled(level)
        host_img = host.pyramid[level]
        ul, vl = _level_coords(point.u, point.v, level)
        if not (0 <= ul <= host_img.width - 1 and 0 <= vl <= host_img.height - 1):
            continue
        host_i = float(_bilinear_raw(host_img.pixels, ul, vl))
        for _ in range(cfg.depth_refine_iterations):
            num = den = energy_now = 0.0
            for tgt in targets:
                rel = relative_transform(host, tgt)
                xt = rel.apply(ray / d)
                z = xt[2]
                if z <= 1e-9:
                    continue
                u = cam_l.fx * xt[0] / z + cam_l.cx
                v = cam_l.fy * xt[1] / z + cam_l.cy
                img = tgt.pyramid[level]
                if not (
                    SAMPLE_MARGIN <= u <= img.width - 1 - SAMPLE_MARGIN
                    and SAMPLE_MARGIN <= v <= img.height - 1 - SAMPLE_MARGIN
                ):
                    continue
                i_j, gu, gv = _bilinear_raw_with_gradient(img.pixels, u, v)
                rho = gain_ratio(host, tgt)
                r = (float(i_j) - tgt.affine_b) - rho * (host_i - host.affine_b)
                zi = 1.0 / z
                gxc = np.array(
                    [
                        float(gu) * cam_l.fx * zi,
                        float(gv) * cam_l.fy * zi,
                        -(float(gu) * cam_l.fx * xt[0] + float(gv) * cam_l.fy * xt[1]) * zi * zi,
                    ]
                )
                j = float(gxc @ (-(xt - rel.translation) / d))
                w = 1.0 if abs(r) <= cfg.huber_threshold else cfg.huber_threshold / abs(r)
                num += w * j * r
                den += w * j * j
                energy_now += _huber_rho(r, cfg.huber_threshold)
            if den < 1e-14:
                break
            d_new = d - num / den
            if d_new <= MIN_INVERSE_DEPTH or d_new >= MAX_INVERSE_DEPTH:
                d = float(np.clip(d_new, MIN_INVERSE_DEPTH * 1.001, MAX_INVERSE_DEPTH * 0.999))
                clamped = touched = True
                break
            energy_new = _point_depth_energy(d_new, ray, host_i, host, targets, cam_l, level, cfg)
            if energy_new < energy_now:
                touched = touched or abs(d_new - d) > 0.0
                d = d_new
            else:
                break
    if clamped:
        return d, DepthRefineStatus.CLAMPED
    if not touched or d == point.inverse_depth:
        return float(point.inverse_depth), DepthRefineStatus.UNCHANGED
    return d, DepthRefineStatus.UPDATED


def _point_depth_energy(d, ray, host_i, host, targets, cam_l, level, cfg) -> float:
    total = 0.0
    seen = False
    for tgt in targets:
        rel = relative_transform(host, tgt)
        xt = rel.apply(ray / d)
        z = xt[2]
        if z <= 1e-9:
            continue
        u = cam_l.fx * xt[0] / z + cam_l.cx
        v = cam_l.fy * xt[1] / z + cam_l.cy
        img = tgt.pyramid[level]
        if not (
            SAMPLE_MARGIN <= u <= img.width - 1 - SAMPLE_MARGIN
            and SAMPLE_MARGIN <= v <= img.height - 1 - SAMPLE_MARGIN
        ):
            continue
        i_j = float(_bilinear_raw(img.pixels, u, v))
        rho = gain_ratio(host, tgt)
        total += _huber_rho((i_j - tgt.affine_b) - rho * (host_i - host.affine_b),
                            cfg.huber_threshold)
        seen = True
    return total if seen else math.inf


def refine_depths_batch(
    points: list[TrackedPoint],
    host: PhotometricFrame,
    targets: list[PhotometricFrame],
    camera: PinholeCamera,
    config: OdometryConfig,
) -> None:
    """Vectorized coarse-to-fine inverse-depth refinement; mutates the points in place."""
    if not points or not targets:
        return
    us = np.array([p.u for p in points])
    vs = np.array([p.v for p in points])
    d = np.array([p.inverse_depth for p in points])
    rays = _host_rays(us, vs, camera)
    host_levels = _prepare_host_levels(host, us, vs)
    rels = [relative_transform(host, t) for t in targets]
    rhos = [gain_ratio(host, t) for t in targets]
    k = config.huber_threshold

    def visible(rel, dv, cam_l, img, host_ok):
        xt = rays / dv[:, None] @ rel.rotation_matrix().T + rel.translation
        z = xt[:, 2]
        ok = host_ok & (z > 1e-9)
        zs = np.where(z > 1e-9, z, 1.0)
        u = cam_l.fx * xt[:, 0] / zs + cam_l.cx
        v = cam_l.fy * xt[:, 1] / zs + cam_l.cy
        ok &= (
            (u >= SAMPLE_MARGIN)
            & (u <= img.shape[1] - 1 - SAMPLE_MARGIN)
            & (v >= SAMPLE_MARGIN)
            & (v <= img.shape[0] - 1 - SAMPLE_MARGIN)
        )
        return xt, z, u, v, ok

    def batch_energy(dv, level, cam_l):
        total = np.zeros_like(dv)
        seen = np.zeros(dv.shape, dtype=bool)
        host_i = host_levels[level].intensities
        host_ok = host_levels[level].valid
        for rel, rho, tgt in zip(rels, rhos, targets):
            img = tgt.pyramid[level].pixels
            _, _, u, v, ok = visible(rel, dv, cam_l, img, host_ok)
            if not np.any(ok):
                continue
            i_j = _bilinear_raw(img, u[ok], v[ok])
            r = (i_j - tgt.affine_b) - rho * (host_i[ok] - host.affine_b)
            a = np.abs(r)
            total[ok] += np.where(a <= k, 0.5 * r * r, k * (a - 0.5 * k))
            seen[ok] = True
        total[~seen] = np.inf
        return total

    for level in config.depth_refine_levels:
        if level >= len(host.pyramid):
            continue
        cam_l = camera.scaled(level)
        host_i = host_levels[level].intensities
        host_ok = host_levels[level].valid
        for _ in range(config.depth_refine_iterations):
            num = np.zeros_like(d)
            den = np.zeros_like(d)
            for rel, rho, tgt in zip(rels, rhos, targets):
                img = tgt.pyramid[level].pixels
                xt, z, u, v, ok = visible(rel, d, cam_l, img, host_ok)
                if not np.any(ok):
                    continue
                sel = np.nonzero(ok)[0]
                i_j, gu, gv = _bilinear_raw_with_gradient(img, u[sel], v[sel])
                r = (i_j - tgt.affine_b) - rho * (host_i[sel] - host.affine_b)
                zi = 1.0 / z[sel]
                gxc = np.stack(
                    [
                        gu * cam_l.fx * zi,
                        gv * cam_l.fy * zi,
                        -(gu * cam_l.fx * xt[sel, 0] + gv * cam_l.fy * xt[sel, 1]) * zi * zi,
                    ],
                    axis=1,
                )
                dxt = -(xt[sel] - rel.translation) / d[sel, None]
                j = np.sum(gxc * dxt, axis=1)
                a = np.abs(r)
                w = np.where(a <= k, 1.0, k / np.maximum(a, 1e-12))
                num[sel] += w * j * r
                den[sel] += w * j * j
            movable = den > 1e-14
            if not np.any(movable):
                break
            step = np.where(movable, -num / np.maximum(den, 1e-14), 0.0)
            d_try = np.clip(d + step, d / STEP_TRUST, d * STEP_TRUST)
            d_try = np.clip(d_try, MIN_INVERSE_DEPTH * 1.001, MAX_INVERSE_DEPTH * 0.999)
            e_old = batch_energy(d, level, cam_l)
            e_new = batch_energy(d_try, level, cam_l)
            improved = (e_new < e_old) & movable
            if not np.any(improved):
                break
            d = np.where(improved, d_try, d)
    for p, dv in zip(points, d):
        p.inverse_depth = float(dv)


@dataclass(frozen=True)
class FrameInput:
    gray: IntensityImage
    color: np.ndarray | None = None
    exposure: float = 1.0


@dataclass
class OdometryResult:
    trajectory: list[Se3Pose]  # keyframe poses, camera-to-world
    cloud: list[TrackedPoint]
    keyframe_ids: list[int]
    frame_poses: list[Se3Pose]  # every frame
    frames: list[PhotometricFrame]
    energies: list[PhotometricEnergy]

    @property
    def keyframes(self) -> dict[int, PhotometricFrame]:
        return {i: self.frames[i] for i in self.keyframe_ids}


def frames_from_arrays(
    colors,
    exposures: np.ndarray | None = None,
) -> list[FrameInput]:
    """Build frame inputs from (H, W, 3) color or (H, W) grayscale arrays."""
    from .image_io import rgb_to_luma

    out = []
    for i, arr in enumerate(colors):
        arr = np.asarray(arr, dtype=np.float64)
        exp = float(exposures[i]) if exposures is not None else 1.0
        if arr.ndim == 3:
            out.append(FrameInput(gray=IntensityImage(rgb_to_luma(arr)), color=arr, exposure=exp))
        else:
            out.append(FrameInput(gray=IntensityImage(arr), exposure=exp))
    return out


DEGENERATE_BAND = 20.0  # keep inverse depths within this factor of the keyframe median


def _drop_degenerate_depths(points: list[TrackedPoint]) -> list[TrackedPoint]:
    """Remove points whose inverse depth ran off to the clamp bounds or far
    outside the keyframe's depth distribution."""
    if not points:
        return points
    d = np.array([p.inverse_depth for p in points])
    med = float(np.median(d))
    lo = max(med / DEGENERATE_BAND, MIN_INVERSE_DEPTH * 1.5)
    hi = min(med * DEGENERATE_BAND, MAX_INVERSE_DEPTH / 1.5)
    return [p for p, dv in zip(points, d) if lo <= dv <= hi]


def run_odometry(
    frames: list[FrameInput],
    camera: PinholeCamera,
    config: OdometryConfig | None = None,
    bootstrap_depth: np.ndarray | None = None,
) -> OdometryResult:
    """Frame-to-keyframe tracking with point replenishment at every keyframe.

    The first frame anchors the world at identity. `bootstrap_depth`, when
    given, is an (H, W) metric depth map for frame 0 used to initialize the
    first keyframe's point depths; without it depths start at the configured
    constant and the reconstruction scale is arbitrary (monocular gauge
    freedom).

    Newly selected points without a warped prior start immature: they are kept
    out of pose tracking and get a ray search plus refinement against each
    subsequent frame until enough baselines have been seen. Gradient-less fill
    points are generated when a keyframe retires, once its depths are settled.
    """
    from . import selection as sel

    cfg = config or OdometryConfig()
    if len(frames) < 2:
        raise InvalidArgumentError("odometry needs at least 2 frames")

    photo_frames = [
        PhotometricFrame(
            id=i,
            pyramid=build_pyramid(f.gray, cfg.pyramid_levels),
            color=f.color,
            exposure=f.exposure,
        )
        for i, f in enumerate(frames)
    ]

    cloud: list[TrackedPoint] = []
    keyframe_ids: list[int] = []
    frame_poses: list[Se3Pose] = [Se3Pose.identity()]
    energies: list[PhotometricEnergy] = []
    points_by_kf: dict[int, list[TrackedPoint]] = {}
    immature_by_kf: dict[int, list[TrackedPoint]] = {}
    search_rounds: dict[int, int] = {}

    def spawn_keyframe(frame: PhotometricFrame, prior_points: list[TrackedPoint]):
        result = sel.select_pixels(frame.image, cfg.selection)
        mature: list[TrackedPoint] = []
        immature: list[TrackedPoint] = []
        if bootstrap_depth is not None and frame.id == 0:
            depth_map = np.asarray(bootstrap_depth, dtype=np.float64)
            for (u, v), status in result.iter_with_status():
                depth = float(depth_map[v, u])
                idp = float(np.clip(1.0 / max(depth, 1e-6),
                                    MIN_INVERSE_DEPTH * 1.01, MAX_INVERSE_DEPTH * 0.99))
                mature.append(_make_point(frame, u, v, idp, status))
        elif frame.id == 0:
            # constant-depth start; the bootstrap alternation settles these
            for (u, v), status in result.iter_with_status():
                mature.append(_make_point(frame, u, v, cfg.init_inverse_depth, status))
        else:
            pixels = [(u, v) for (u, v), _ in result.iter_with_status()]
            init, no_prior = _propagate_depths(
                frame, prior_points, pixels, photo_frames, camera, cfg
            )
            for ((u, v), status), idp, fresh in zip(result.iter_with_status(), init, no_prior):
                point = _make_point(frame, u, v, float(idp), status)
                (immature if fresh else mature).append(point)
        points_by_kf[frame.id] = mature
        immature_by_kf[frame.id] = immature
        search_rounds[frame.id] = 0
        keyframe_ids.append(frame.id)

    def ripen(kf_frame: PhotometricFrame, target: PhotometricFrame):
        """Search-and-refine the keyframe's immature points against a new frame.

        Immature points never constrain the pose; they keep ripening until the
        keyframe retires, when they join the cloud (and seed propagation for
        the next keyframe).
        """
        immature = immature_by_kf[kf_frame.id]
        if not immature:
            return
        rounds = search_rounds[kf_frame.id]
        span = SEARCH_SPANS[min(rounds, len(SEARCH_SPANS) - 1)]
        coords = np.array([[p.u, p.v] for p in immature])
        init = np.array([p.inverse_depth for p in immature])
        found = _search_depths(kf_frame, target, coords, init, camera, cfg, span=span)
        for p, d in zip(immature, found):
            p.inverse_depth = float(d)
        refine_depths_batch(immature, kf_frame, [target], camera, cfg)
        search_rounds[kf_frame.id] = rounds + 1
        if search_rounds[kf_frame.id] >= MATURITY_ROUNDS:
            # promote points whose depth has settled; the rest keep ripening
            settled = [
                p for p, d0 in zip(immature, found)
                if abs(math.log(p.inverse_depth) - math.log(d0)) < PROMOTE_STABILITY
            ]
            if settled:
                points_by_kf[kf_frame.id].extend(settled)
                keep = set(id(p) for p in settled)
                immature_by_kf[kf_frame.id] = [p for p in immature if id(p) not in keep]

    def adopt_immature(kf_frame: PhotometricFrame):
        points_by_kf[kf_frame.id].extend(immature_by_kf.pop(kf_frame.id, []))

    def add_fill(kf_frame: PhotometricFrame):
        pts = _drop_degenerate_depths(points_by_kf[kf_frame.id])
        fill = (
            sel.fill_gradientless_regions(
                pts, kf_frame.image, cfg.selection,
                color_image=kf_frame.color, host_frame=kf_frame.id,
            )
            if pts
            else []
        )
        points_by_kf[kf_frame.id] = pts + fill
        cloud.extend(points_by_kf[kf_frame.id])

    spawn_keyframe(photo_frames[0], [])

    kf = photo_frames[0]
    rel_guess = Se3Pose.identity()
    for i in range(1, len(photo_frames)):
        frame = photo_frames[i]
        try:
            result = track_frame(
                frame, kf, points_by_kf[kf.id], camera,
                initial_guess=rel_guess, config=cfg,
            )
        except TrackingLostError as exc:
            raise TrackingLostError(f"frame {i}: {exc}", frame_index=i) from exc
        if bootstrap_depth is None and kf.id == 0:
            # monocular bootstrap: the first keyframe starts with constant
            # depths, so alternate one depth-refinement / re-tracking round to
            # settle on a self-consistent (arbitrary-scale) structure
            frame.pose = result.pose
            frame.affine_a = result.affine_a
            frame.affine_b = result.affine_b
            refine_depths_batch(points_by_kf[0], kf, [frame], camera, cfg)
            result = track_frame(
                frame, kf, points_by_kf[0], camera,
                initial_guess=result.relative, config=cfg,
            )
        frame.pose = result.pose
        frame.affine_a = result.affine_a
        frame.affine_b = result.affine_b
        rel_guess = result.relative
        frame_poses.append(result.pose)
        energies.append(result.energy)

        ripen(kf, frame)

        if i % cfg.keyframe_interval == 0 and i != len(photo_frames) - 1:
            adopt_immature(kf)
            window = keyframe_ids[-cfg.refine_window:]
            prior = [p for k in window for p in points_by_kf[k]]
            spawn_keyframe(frame, prior)
            # every tracked frame inside the window span serves as a refinement
            # target; the extra baselines average out per-frame alignment bias
            span = range(window[0], i + 1)
            for host_id in window:
                tgts = [photo_frames[j] for j in span if j != host_id]
                if tgts:
                    refine_depths_batch(
                        points_by_kf[host_id], photo_frames[host_id], tgts, camera, cfg
                    )
            add_fill(kf)
            kf = frame
            rel_guess = Se3Pose.identity()

    adopt_immature(kf)
    add_fill(kf)
    return OdometryResult(
        trajectory=[photo_frames[j].pose for j in keyframe_ids],
        cloud=cloud,
        keyframe_ids=keyframe_ids,
        frame_poses=frame_poses,
        frames=photo_frames,
        energies=energies,
    )


def _make_point(frame: PhotometricFrame, u, v, idp, status) -> TrackedPoint:
    if frame.color is not None:
        color = np.asarray(frame.color[int(round(v)), int(round(u))], dtype=np.float64)
    else:
        g = frame.image.pixels[int(round(v)), int(round(u))]
        color = np.array([g, g, g])
    return TrackedPoint(
        host_frame=frame.id, u=float(u), v=float(v),
        inverse_depth=idp, status=status, color=color,
    )


def _propagate_depths(
    frame: PhotometricFrame,
    prior_points: list[TrackedPoint],
    pixels: list[tuple[int, int]],
    photo_frames: list[PhotometricFrame],
    camera: PinholeCamera,
    cfg: OdometryConfig,
) -> tuple[np.ndarray, np.ndarray]:
    """Initial inverse depths for new keyframe points from the warped prior cloud.

    Returns (depths, needs_search): pixels without a nearby warped prior get
    the median warped depth and are flagged for a ray search.
    """
    n = len(pixels)
    if not prior_points:
        return np.full(n, cfg.init_inverse_depth), np.ones(n, dtype=bool)
    w_u, w_v, w_d = [], [], []
    for p in prior_points:
        host = photo_frames[p.host_frame]
        try:
            u, v, idp = warp_point(p, host, frame, camera)
        except NotVisibleError:
            continue
        w_u.append(u)
        w_v.append(v)
        w_d.append(idp)
    if not w_d:
        return np.full(n, cfg.init_inverse_depth), np.ones(n, dtype=bool)
    w_u = np.array(w_u)
    w_v = np.array(w_v)
    w_d = np.array(w_d)
    coords = np.array(pixels, dtype=np.float64).reshape(-1, 2)
    du = coords[:, 0][:, None] - w_u[None, :]
    dv = coords[:, 1][:, None] - w_v[None, :]
    dist2 = du * du + dv * dv
    nearest = np.argmin(dist2, axis=1)
    out = np.full(n, float(np.median(w_d)))
    near_ok = dist2[np.arange(n), nearest] <= 8.0**2
    out[near_ok] = w_d[nearest[near_ok]]
    out = np.clip(out, MIN_INVERSE_DEPTH * 1.01, MAX_INVERSE_DEPTH * 0.99)
    return out, ~near_ok


SEARCH_CANDIDATES = 33
SEARCH_DECISIVE = 0.35  # searched depth must beat the prior's score by this factor
STEP_TRUST = 1.6  # max multiplicative inverse-depth change per refinement iteration
SEARCH_SPANS = (3.0, 1.8, 1.4)  # candidate range factor, per search round
MATURITY_ROUNDS = 3
PROMOTE_STABILITY = 0.03  # max |log depth| change in the final ripening round
_PATCH = np.array([(0.0, 0.0), (1.0, 0.0), (-1.0, 0.0), (0.0, 1.0), (0.0, -1.0)])


def _search_depths(
    frame: PhotometricFrame,
    reference: PhotometricFrame,
    pixels: np.ndarray,
    init: np.ndarray,
    camera: PinholeCamera,
    cfg: OdometryConfig,
    span: float = 2.2,
) -> np.ndarray:
    """Photometric inverse-depth search along each pixel ray against `reference`.

    Candidates are log-spaced around the initial guess; the score is a
    gain-corrected 5-sample patch SSD. Points with no visible candidate keep
    their initial depth.
    """
    m = len(pixels)
    if m == 0:
        return init
    cand = init[:, None] * np.geomspace(1.0 / span, span, SEARCH_CANDIDATES)[None, :]
    cand = np.clip(cand, MIN_INVERSE_DEPTH * 1.01, MAX_INVERSE_DEPTH * 0.99)
    rel = relative_transform(frame, reference)
    rho = gain_ratio(frame, reference)
    ref_img = reference.pyramid[0].pixels
    host_img = frame.pyramid[0].pixels
    score = np.zeros((m, SEARCH_CANDIDATES))
    visible = np.ones((m, SEARCH_CANDIDATES), dtype=bool)
    for off_u, off_v in _PATCH:
        us = pixels[:, 0] + off_u
        vs = pixels[:, 1] + off_v
        us = np.clip(us, 0, camera.width - 1)
        vs = np.clip(vs, 0, camera.height - 1)
        host_i = _bilinear_raw(host_img, us, vs)
        rays = _host_rays(us, vs, camera)
        xt = rays[:, None, :] / cand[:, :, None] @ rel.rotation_matrix().T + rel.translation
        z = xt[:, :, 2]
        ok = z > 1e-9
        zs = np.where(ok, z, 1.0)
        u = camera.fx * xt[:, :, 0] / zs + camera.cx
        v = camera.fy * xt[:, :, 1] / zs + camera.cy
        ok &= (
            (u >= SAMPLE_MARGIN)
            & (u <= camera.width - 1 - SAMPLE_MARGIN)
            & (v >= SAMPLE_MARGIN)
            & (v <= camera.height - 1 - SAMPLE_MARGIN)
        )
        i_ref = np.where(ok, _bilinear_raw(ref_img, np.clip(u, 0, camera.width - 1),
                                           np.clip(v, 0, camera.height - 1)), 0.0)
        r = (i_ref - reference.affine_b) - rho * (host_i[:, None] - frame.affine_b)
        score += np.where(ok, r * r, 0.0)
        visible &= ok
    score = np.where(visible, score, np.inf)
    # score of the initial guess: nearest candidate to init (geomspace center)
    center = SEARCH_CANDIDATES // 2
    init_score = np.minimum(score[:, center], score[:, center - 1])
    best = np.argmin(score, axis=1)
    best_score = score[np.arange(m), best]
    # adopt the searched depth only on decisive evidence; ambiguous or flat
    # score profiles keep the prior
    adopt = np.isfinite(best_score) & (
        ~np.isfinite(init_score) | (best_score < SEARCH_DECISIVE * init_score)
    )
    out = init.copy()
    out[adopt] = cand[np.arange(m), best][adopt]
    return out
