"""Ideal pinhole camera model, pixel coordinates with u along width."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BehindCameraError, InvalidArgumentError, InvalidDepthError
from .se3 import Se3Pose

MIN_DEPTH = 1e-9


@dataclass(frozen=True)
class PinholeCamera:
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise InvalidArgumentError("focal lengths must be positive")
        if self.width <= 0 or self.height <= 0:
            raise InvalidArgumentError("image dimensions must be positive")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise InvalidArgumentError("principal point must lie inside the image")

    def scaled(self, level: int) -> "PinholeCamera":
        """Intrinsics for pyramid level `level` under 2x2 box downsampling.

        The box filter places a coarse pixel's center at the centroid of its
        2x2 source block, which shifts the principal point by (2^l - 1) / 2.
        """
        s = float(2**level)
        off = (s - 1.0) / 2.0
        return PinholeCamera(
            fx=self.fx / s,
            fy=self.fy / s,
            cx=(self.cx - off) / s,
            cy=(self.cy - off) / s,
            width=max(1, self.width // (2**level)),
            height=max(1, self.height // (2**level)),
        )


def project(point: np.ndarray, camera: PinholeCamera) -> tuple[float, float, float]:
    """Project a camera-frame point; returns (u, v, depth)."""
    x, y, z = np.asarray(point, dtype=np.float64).reshape(3)
    if z <= MIN_DEPTH:
        raise BehindCameraError(f"point depth {z} is not positive")
    return (camera.fx * x / z + camera.cx, camera.fy * y / z + camera.cy, z)


def backproject(
    u: float, v: float, inverse_depth: float, camera: PinholeCamera, pose: Se3Pose
) -> np.ndarray:
    """Lift a pixel with inverse depth into world coordinates through `pose`."""
    if inverse_depth <= 0:
        raise InvalidDepthError(f"inverse depth {inverse_depth} must be positive")
    ray = np.array([(u - camera.cx) / camera.fx, (v - camera.cy) / camera.fy, 1.0])
    return pose.apply(ray / inverse_depth)
