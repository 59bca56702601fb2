"""Perspective projection of 3-D Gaussians to screen-space ellipses.

The 2-D covariance uses the first-order (EWA) linearization of the pinhole
projection at the Gaussian center: cov2d = J W Sigma W^T J^T + floor * I,
where Sigma = R diag(s^2) R^T, W is the world-to-camera rotation and J the
projection Jacobian. The backward pass propagates screen-space gradients to
position, log scale, and rotation, including the dependence of J on the
center.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..camera import PinholeCamera
from ..se3 import Se3Pose
from .model import Gaussian3d, SplatScene, sigmoid

NEAR_PLANE = 0.01
COV_FLOOR = 0.3  # px^2 added to the diagonal
ALPHA_SKIP = 1.0 / 255.0


@dataclass(frozen=True)
class ProjectedGaussian:
    mean2d: np.ndarray
    cov2d: np.ndarray
    depth: float
    color: np.ndarray
    opacity: float


def _quat_to_matrix_batch(q: np.ndarray) -> np.ndarray:
    """(N, 4) unit quaternions (w, x, y, z) -> (N, 3, 3) rotation matrices."""
    w, x, y, z = q[:, 0], q[:, 1], q[:, 2], q[:, 3]
    m = np.empty((len(q), 3, 3))
    m[:, 0, 0] = 1 - 2 * (y * y + z * z)
    m[:, 0, 1] = 2 * (x * y - w * z)
    m[:, 0, 2] = 2 * (x * z + w * y)
    m[:, 1, 0] = 2 * (x * y + w * z)
    m[:, 1, 1] = 1 - 2 * (x * x + z * z)
    m[:, 1, 2] = 2 * (y * z - w * x)
    m[:, 2, 0] = 2 * (x * z - w * y)
    m[:, 2, 1] = 2 * (y * z + w * x)
    m[:, 2, 2] = 1 - 2 * (x * x + y * y)
    return m


@dataclass
class ProjectionBatch:
    """Vectorized projection of a whole scene plus intermediates for the backward pass."""

    valid: np.ndarray  # (N,) Gaussians in front of the near plane with usable opacity
    mean2d: np.ndarray  # (N, 2)
    depth: np.ndarray  # (N,)
    cov2d: np.ndarray  # (N, 2, 2), floored
    conic: np.ndarray  # (N, 2, 2), inverse of cov2d
    radius: np.ndarray  # (N,) pixel radius of the alpha >= 1/255 support
    opacity: np.ndarray  # (N,)
    # backward intermediates
    cam_pts: np.ndarray  # (N, 3)
    w_rot: np.ndarray  # (3, 3) world-to-camera rotation
    rot_mats: np.ndarray  # (N, 3, 3) Gaussian rotations (from normalized quats)
    qnorm: np.ndarray  # (N, 4) normalized quaternions
    qraw_norm: np.ndarray  # (N,) raw quaternion norms
    scales: np.ndarray  # (N, 3)
    m_cov: np.ndarray  # (N, 3, 3) camera-frame 3-D covariance


def project_scene(scene: SplatScene, camera: PinholeCamera, view_pose: Se3Pose) -> ProjectionBatch:
    n = len(scene)
    rcw = view_pose.rotation_matrix()
    w_rot = rcw.T
    cam_pts = (scene.positions - view_pose.translation) @ rcw
    z = cam_pts[:, 2]
    opacity = sigmoid(scene.opacity_logits)
    valid = (z > NEAR_PLANE) & (opacity > ALPHA_SKIP)

    zs = np.where(valid, z, 1.0)
    mean2d = np.empty((n, 2))
    mean2d[:, 0] = camera.fx * cam_pts[:, 0] / zs + camera.cx
    mean2d[:, 1] = camera.fy * cam_pts[:, 1] / zs + camera.cy

    qn = np.linalg.norm(scene.rotations, axis=1)
    qnorm = scene.rotations / np.maximum(qn[:, None], 1e-12)
    rot = _quat_to_matrix_batch(qnorm)
    scales = np.exp(scene.log_scales)

    a = w_rot[None, :, :] @ rot  # (N, 3, 3)
    b = a * scales[:, None, :]
    m_cov = b @ b.transpose(0, 2, 1)

    zi = 1.0 / zs
    j00 = camera.fx * zi
    j02 = -camera.fx * cam_pts[:, 0] * zi * zi
    j11 = camera.fy * zi
    j12 = -camera.fy * cam_pts[:, 1] * zi * zi

    # cov2d = J M J^T with J = [[j00, 0, j02], [0, j11, j12]]
    c00 = (
        j00 * (m_cov[:, 0, 0] * j00 + m_cov[:, 0, 2] * j02)
        + j02 * (m_cov[:, 2, 0] * j00 + m_cov[:, 2, 2] * j02)
    )
    c01 = (
        j00 * (m_cov[:, 0, 1] * j11 + m_cov[:, 0, 2] * j12)
        + j02 * (m_cov[:, 2, 1] * j11 + m_cov[:, 2, 2] * j12)
    )
    c11 = (
        j11 * (m_cov[:, 1, 1] * j11 + m_cov[:, 1, 2] * j12)
        + j12 * (m_cov[:, 2, 1] * j11 + m_cov[:, 2, 2] * j12)
    )
    cov2d = np.empty((n, 2, 2))
    cov2d[:, 0, 0] = c00 + COV_FLOOR
    cov2d[:, 0, 1] = c01
    cov2d[:, 1, 0] = c01
    cov2d[:, 1, 1] = c11 + COV_FLOOR

    det = cov2d[:, 0, 0] * cov2d[:, 1, 1] - cov2d[:, 0, 1] ** 2
    det = np.maximum(det, 1e-12)
    conic = np.empty_like(cov2d)
    conic[:, 0, 0] = cov2d[:, 1, 1] / det
    conic[:, 0, 1] = -cov2d[:, 0, 1] / det
    conic[:, 1, 0] = -cov2d[:, 0, 1] / det
    conic[:, 1, 1] = cov2d[:, 0, 0] / det

    # support radius: alpha >= 1/255 inside mahalanobis^2 <= 2 ln(255 * opacity)
    mid = 0.5 * (cov2d[:, 0, 0] + cov2d[:, 1, 1])
    lam_max = mid + np.sqrt(np.maximum(mid * mid - det, 0.0))
    q_max = 2.0 * np.log(np.maximum(255.0 * opacity, 1.0 + 1e-9))
    radius = np.sqrt(lam_max * q_max)

    return ProjectionBatch(
        valid=valid, mean2d=mean2d, depth=z, cov2d=cov2d, conic=conic,
        radius=radius, opacity=opacity, cam_pts=cam_pts, w_rot=w_rot,
        rot_mats=rot, qnorm=qnorm, qraw_norm=qn, scales=scales, m_cov=m_cov,
    )


def project_gaussian(
    g: Gaussian3d, camera: PinholeCamera, view_pose: Se3Pose
) -> ProjectedGaussian | None:
    """Project one Gaussian; returns None when culled by the near plane."""
    scene = SplatScene.from_gaussians([g])
    batch = project_scene(scene, camera, view_pose)
    if batch.cam_pts[0, 2] <= NEAR_PLANE:
        return None
    return ProjectedGaussian(
        mean2d=batch.mean2d[0].copy(),
        cov2d=batch.cov2d[0].copy(),
        depth=float(batch.depth[0]),
        color=g.color.copy(),
        opacity=float(batch.opacity[0]),
    )


def project_scene_backward(
    batch: ProjectionBatch,
    scene: SplatScene,
    camera: PinholeCamera,
    g_mean2d: np.ndarray,
    g_cov2d: np.ndarray,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Chain screen-space gradients back to position, log scale, and rotation."""
    n = len(scene)
    z = np.where(batch.valid, batch.depth, 1.0)
    zi = 1.0 / z
    x = batch.cam_pts[:, 0]
    y = batch.cam_pts[:, 1]
    fx, fy = camera.fx, camera.fy

    # mean2d path: g_cam = J^T g_mean2d
    g_cam = np.empty((n, 3))
    g_cam[:, 0] = g_mean2d[:, 0] * fx * zi
    g_cam[:, 1] = g_mean2d[:, 1] * fy * zi
    g_cam[:, 2] = -(g_mean2d[:, 0] * fx * x + g_mean2d[:, 1] * fy * y) * zi * zi

    # cov2d path
    g2 = 0.5 * (g_cov2d + g_cov2d.transpose(0, 2, 1))
    j = np.zeros((n, 2, 3))
    j[:, 0, 0] = fx * zi
    j[:, 0, 2] = -fx * x * zi * zi
    j[:, 1, 1] = fy * zi
    j[:, 1, 2] = -fy * y * zi * zi

    g_j = 2.0 * g2 @ j @ batch.m_cov  # (N, 2, 3)
    g_m = j.transpose(0, 2, 1) @ g2 @ j  # (N, 3, 3)

    # J depends on the camera-frame center
    gj00 = g_j[:, 0, 0]
    gj02 = g_j[:, 0, 2]
    gj11 = g_j[:, 1, 1]
    gj12 = g_j[:, 1, 2]
    zi2 = zi * zi
    zi3 = zi2 * zi
    g_cam[:, 0] += gj02 * (-fx * zi2)
    g_cam[:, 1] += gj12 * (-fy * zi2)
    g_cam[:, 2] += (
        gj00 * (-fx * zi2)
        + gj11 * (-fy * zi2)
        + gj02 * (2.0 * fx * x * zi3)
        + gj12 * (2.0 * fy * y * zi3)
    )

    g_pos = g_cam @ batch.w_rot

    # Sigma = B B^T, B = R diag(s); M = W Sigma W^T
    g_sigma = batch.w_rot.T[None, :, :] @ g_m @ batch.w_rot[None, :, :]
    g_sigma = g_sigma + g_sigma.transpose(0, 2, 1)  # = 2 sym(g_sigma)
    bmat = batch.rot_mats * batch.scales[:, None, :]
    g_b = g_sigma @ bmat
    g_scale = np.einsum("nij,nij->nj", batch.rot_mats, g_b)
    g_log_scale = g_scale * batch.scales
    g_rot_mat = g_b * batch.scales[:, None, :]

    g_quat_hat = _rotation_backward(batch.qnorm, g_rot_mat)
    # normalization: q_hat = q / |q|
    dot = np.sum(g_quat_hat * batch.qnorm, axis=1, keepdims=True)
    g_quat = (g_quat_hat - batch.qnorm * dot) / np.maximum(batch.qraw_norm[:, None], 1e-12)

    invalid = ~batch.valid
    g_pos[invalid] = 0.0
    g_log_scale[invalid] = 0.0
    g_quat[invalid] = 0.0
    return g_pos, g_log_scale, g_quat


def _rotation_backward(q: np.ndarray, g_r: np.ndarray) -> np.ndarray:
    """Gradient of sum(g_r * R(q)) with respect to the (normalized) quaternion."""
    w, x, y, z = q[:, 0], q[:, 1], q[:, 2], q[:, 3]
    r = g_r
    g = np.empty_like(q)
    g[:, 0] = 2.0 * (
        -z * r[:, 0, 1] + y * r[:, 0, 2]
        + z * r[:, 1, 0] - x * r[:, 1, 2]
        - y * r[:, 2, 0] + x * r[:, 2, 1]
    )
    g[:, 1] = 2.0 * (
        y * r[:, 0, 1] + z * r[:, 0, 2]
        + y * r[:, 1, 0] - 2.0 * x * r[:, 1, 1] - w * r[:, 1, 2]
        + z * r[:, 2, 0] + w * r[:, 2, 1] - 2.0 * x * r[:, 2, 2]
    )
    g[:, 2] = 2.0 * (
        -2.0 * y * r[:, 0, 0] + x * r[:, 0, 1] + w * r[:, 0, 2]
        + x * r[:, 1, 0] + z * r[:, 1, 2]
        - w * r[:, 2, 0] + z * r[:, 2, 1] - 2.0 * y * r[:, 2, 2]
    )
    g[:, 3] = 2.0 * (
        -2.0 * z * r[:, 0, 0] - w * r[:, 0, 1] + x * r[:, 0, 2]
        + w * r[:, 1, 0] - 2.0 * z * r[:, 1, 1] + y * r[:, 1, 2]
        + x * r[:, 2, 0] + y * r[:, 2, 1]
    )
    return g
