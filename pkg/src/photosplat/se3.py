"""SE(3) rigid transforms stored as unit quaternion plus translation.

Conventions: quaternions are (w, x, y, z); a pose maps camera coordinates to
world coordinates, x_world = R x_cam + t. Twists are 6-vectors with the
translational part first, (v_x, v_y, v_z, w_x, w_y, w_z), rotation in radians.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError

SMALL_ANGLE = 1e-8


def quat_multiply(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ]
    )


def quat_to_matrix(q: np.ndarray) -> np.ndarray:
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def matrix_to_quat(m: np.ndarray) -> np.ndarray:
    """Shepperd's method; returns (w, x, y, z) with w >= 0."""
    m = np.asarray(m, dtype=np.float64)
    trace = m[0, 0] + m[1, 1] + m[2, 2]
    if trace > 0.0:
        s = math.sqrt(trace + 1.0) * 2.0
        q = np.array(
            [0.25 * s, (m[2, 1] - m[1, 2]) / s, (m[0, 2] - m[2, 0]) / s, (m[1, 0] - m[0, 1]) / s]
        )
    elif m[0, 0] > m[1, 1] and m[0, 0] > m[2, 2]:
        s = math.sqrt(1.0 + m[0, 0] - m[1, 1] - m[2, 2]) * 2.0
        q = np.array(
            [(m[2, 1] - m[1, 2]) / s, 0.25 * s, (m[0, 1] + m[1, 0]) / s, (m[0, 2] + m[2, 0]) / s]
        )
    elif m[1, 1] > m[2, 2]:
        s = math.sqrt(1.0 + m[1, 1] - m[0, 0] - m[2, 2]) * 2.0
        q = np.array(
            [(m[0, 2] - m[2, 0]) / s, (m[0, 1] + m[1, 0]) / s, 0.25 * s, (m[1, 2] + m[2, 1]) / s]
        )
    else:
        s = math.sqrt(1.0 + m[2, 2] - m[0, 0] - m[1, 1]) * 2.0
        q = np.array(
            [(m[1, 0] - m[0, 1]) / s, (m[0, 2] + m[2, 0]) / s, (m[1, 2] + m[2, 1]) / s, 0.25 * s]
        )
    if q[0] < 0.0:
        q = -q
    return q / np.linalg.norm(q)


def _skew(v: np.ndarray) -> np.ndarray:
    x, y, z = v
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


@dataclass(frozen=True)
class Se3Pose:
    """Rigid camera-to-world transform. Immutable; quaternion renormalized on construction."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        q = np.asarray(self.rotation, dtype=np.float64).reshape(4).copy()
        t = np.asarray(self.translation, dtype=np.float64).reshape(3).copy()
        if not (np.all(np.isfinite(q)) and np.all(np.isfinite(t))):
            raise InvalidArgumentError("pose components must be finite")
        norm = float(np.linalg.norm(q))
        if norm < 1e-12:
            raise InvalidArgumentError("quaternion norm too small")
        q /= norm
        if q[0] < 0.0:
            q = -q
        q.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "rotation", q)
        object.__setattr__(self, "translation", t)

    @staticmethod
    def identity() -> "Se3Pose":
        return Se3Pose(np.array([1.0, 0.0, 0.0, 0.0]), np.zeros(3))

    def rotation_matrix(self) -> np.ndarray:
        return quat_to_matrix(self.rotation)

    def compose(self, other: "Se3Pose") -> "Se3Pose":
        """self after other: (self @ other)(x) = self(other(x))."""
        q = quat_multiply(self.rotation, other.rotation)
        t = self.rotation_matrix() @ other.translation + self.translation
        return Se3Pose(q, t)

    def __matmul__(self, other: "Se3Pose") -> "Se3Pose":
        return self.compose(other)

    def inverse(self) -> "Se3Pose":
        w, x, y, z = self.rotation
        q_inv = np.array([w, -x, -y, -z])
        t_inv = -(quat_to_matrix(q_inv) @ self.translation)
        return Se3Pose(q_inv, t_inv)

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Transform a (3,) point or (N, 3) array of points."""
        p = np.asarray(points, dtype=np.float64)
        return p @ self.rotation_matrix().T + self.translation

    def rotation_angle(self) -> float:
        """Rotation magnitude in radians."""
        w = min(1.0, abs(float(self.rotation[0])))
        return 2.0 * math.acos(w)


def se3_exp(twist: np.ndarray) -> Se3Pose:
    """Exponential map of a twist (translation first, rotation second)."""
    xi = np.asarray(twist, dtype=np.float64).reshape(6)
    if not np.all(np.isfinite(xi)):
        raise InvalidArgumentError("twist components must be finite")
    v, omega = xi[:3], xi[3:]
    theta = float(np.linalg.norm(omega))
    k = _skew(omega)
    k2 = k @ k
    if theta < SMALL_ANGLE:
        # second-order series in the rotation magnitude
        rot = np.eye(3) + k + 0.5 * k2
        vmat = np.eye(3) + 0.5 * k + k2 / 6.0
        quat = matrix_to_quat(rot)
    else:
        axis = omega / theta
        half = 0.5 * theta
        quat = np.concatenate(([math.cos(half)], math.sin(half) * axis))
        vmat = (
            np.eye(3)
            + ((1.0 - math.cos(theta)) / theta**2) * k
            + ((theta - math.sin(theta)) / theta**3) * k2
        )
    return Se3Pose(quat, vmat @ v)


def se3_log(pose: Se3Pose) -> np.ndarray:
    """Inverse of se3_exp; returns the 6-vector twist."""
    w = min(1.0, max(-1.0, float(pose.rotation[0])))
    xyz = pose.rotation[1:]
    sin_half = float(np.linalg.norm(xyz))
    theta = 2.0 * math.atan2(sin_half, w)
    if theta < SMALL_ANGLE:
        omega = 2.0 * xyz
        k = _skew(omega)
        v_inv = np.eye(3) - 0.5 * k + (k @ k) / 12.0
    else:
        axis = xyz / sin_half
        omega = theta * axis
        k = _skew(omega)
        k2 = k @ k
        coeff = (1.0 - (theta * math.cos(0.5 * theta)) / (2.0 * math.sin(0.5 * theta))) / theta**2
        v_inv = np.eye(3) - 0.5 * k + coeff * k2
    return np.concatenate((v_inv @ pose.translation, omega))
