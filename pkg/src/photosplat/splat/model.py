"""Splat scene storage: anisotropic Gaussians with flat RGB color.

The scene keeps structure-of-arrays storage (positions, log scales, unit
quaternions, opacity logits, colors) so rendering and optimization stay
vectorized; `Gaussian3d` is the per-element view used at API boundaries.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import InvalidArgumentError, LoadError
from ..pointcloud import PointCloud

MIN_SCALE = 1e-7
MAX_SCALE = 1e3
INIT_OPACITY = 0.1
SCALE_CLAMP_LO = 1e-4  # times scene extent
SCALE_CLAMP_HI = 0.1


def sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def logit(p):
    return np.log(p / (1.0 - p))


@dataclass
class Gaussian3d:
    position: np.ndarray
    log_scale: np.ndarray
    rotation: np.ndarray  # unit quaternion (w, x, y, z)
    opacity_logit: float
    color: np.ndarray  # RGB in [0, 1]

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=np.float64).reshape(3)
        self.log_scale = np.asarray(self.log_scale, dtype=np.float64).reshape(3)
        q = np.asarray(self.rotation, dtype=np.float64).reshape(4)
        norm = float(np.linalg.norm(q))
        if norm < 1e-12 or not np.all(np.isfinite(q)):
            raise InvalidArgumentError("rotation quaternion must be finite and non-zero")
        self.rotation = q / norm
        self.color = np.asarray(self.color, dtype=np.float64).reshape(3)
        scales = np.exp(self.log_scale)
        if np.any(scales <= MIN_SCALE) or np.any(scales >= MAX_SCALE):
            raise InvalidArgumentError(f"scales must lie in ({MIN_SCALE}, {MAX_SCALE})")
        if self.color.min() < 0.0 or self.color.max() > 1.0:
            raise InvalidArgumentError("color must lie in [0, 1]")

    @property
    def opacity(self) -> float:
        return float(sigmoid(self.opacity_logit))


class SplatScene:
    """Mutable scene owned exclusively by one trainer at a time."""

    def __init__(
        self,
        positions: np.ndarray,
        log_scales: np.ndarray,
        rotations: np.ndarray,
        opacity_logits: np.ndarray,
        colors: np.ndarray,
        background=(0.0, 0.0, 0.0),
        extent: float | None = None,
    ):
        self.positions = np.asarray(positions, dtype=np.float64).reshape(-1, 3)
        n = len(self.positions)
        self.log_scales = np.asarray(log_scales, dtype=np.float64).reshape(n, 3)
        rot = np.asarray(rotations, dtype=np.float64).reshape(n, 4)
        norms = np.linalg.norm(rot, axis=1, keepdims=True)
        if np.any(norms < 1e-12):
            raise InvalidArgumentError("rotation quaternions must be non-zero")
        self.rotations = rot / norms
        self.opacity_logits = np.asarray(opacity_logits, dtype=np.float64).reshape(n)
        self.colors = np.asarray(colors, dtype=np.float64).reshape(n, 3)
        self.background = np.asarray(background, dtype=np.float64).reshape(3)
        self.extent = float(extent) if extent is not None else scene_extent(self.positions)
        self.assert_finite()

    def __len__(self) -> int:
        return len(self.positions)

    def opacities(self) -> np.ndarray:
        return sigmoid(self.opacity_logits)

    def scales(self) -> np.ndarray:
        return np.exp(self.log_scales)

    def gaussian(self, i: int) -> Gaussian3d:
        return Gaussian3d(
            position=self.positions[i],
            log_scale=self.log_scales[i],
            rotation=self.rotations[i],
            opacity_logit=float(self.opacity_logits[i]),
            color=self.colors[i],
        )

    @staticmethod
    def from_gaussians(gaussians: list[Gaussian3d], background=(0.0, 0.0, 0.0),
                       extent: float | None = None) -> "SplatScene":
        if not gaussians:
            raise InvalidArgumentError("scene needs at least one Gaussian")
        return SplatScene(
            positions=np.stack([g.position for g in gaussians]),
            log_scales=np.stack([g.log_scale for g in gaussians]),
            rotations=np.stack([g.rotation for g in gaussians]),
            opacity_logits=np.array([g.opacity_logit for g in gaussians]),
            colors=np.stack([g.color for g in gaussians]),
            background=background,
            extent=extent,
        )

    def copy(self) -> "SplatScene":
        return SplatScene(
            self.positions.copy(), self.log_scales.copy(), self.rotations.copy(),
            self.opacity_logits.copy(), self.colors.copy(),
            background=self.background.copy(), extent=self.extent,
        )

    def normalize_rotations(self) -> None:
        norms = np.linalg.norm(self.rotations, axis=1, keepdims=True)
        self.rotations /= np.maximum(norms, 1e-12)

    def assert_finite(self) -> None:
        for name in ("positions", "log_scales", "rotations", "opacity_logits", "colors"):
            arr = getattr(self, name)
            if not np.all(np.isfinite(arr)):
                bad = int(np.nonzero(~np.isfinite(arr).reshape(len(self), -1).all(axis=1))[0][0])
                raise InvalidArgumentError(f"non-finite {name} at Gaussian {bad}")


def scene_extent(positions: np.ndarray) -> float:
    """Bounding-box diagonal of the point set (1.0 for degenerate clouds)."""
    p = np.asarray(positions, dtype=np.float64).reshape(-1, 3)
    if len(p) < 2:
        return 1.0
    diag = float(np.linalg.norm(p.max(axis=0) - p.min(axis=0)))
    return diag if diag > 0 else 1.0


def third_neighbor_distance(positions: np.ndarray, chunk: int = 512) -> np.ndarray:
    """Distance to the 3rd-nearest neighbor; 0 where fewer than 3 neighbors exist."""
    p = np.asarray(positions, dtype=np.float64).reshape(-1, 3)
    n = len(p)
    if n <= 3:
        return np.zeros(n)
    out = np.empty(n)
    for start in range(0, n, chunk):
        stop = min(start + chunk, n)
        d2 = np.sum((p[start:stop, None, :] - p[None, :, :]) ** 2, axis=2)
        d2[np.arange(stop - start), np.arange(start, stop)] = np.inf
        out[start:stop] = np.sqrt(np.partition(d2, 2, axis=1)[:, 2])
    return out


def init_from_point_cloud(
    cloud: PointCloud,
    scene_extent_hint: float | None = None,
    background=(0.0, 0.0, 0.0),
) -> SplatScene:
    """One isotropic Gaussian per point, scaled by local point spacing.

    Each scale is the distance to the point's 3rd-nearest neighbor, clamped to
    [1e-4, 0.1] times the scene extent; opacity starts at 0.1 with identity
    rotation and the point's color.
    """
    if len(cloud) == 0:
        raise InvalidArgumentError("point cloud is empty")
    extent = scene_extent_hint if scene_extent_hint is not None else scene_extent(cloud.positions)
    d3 = third_neighbor_distance(cloud.positions)
    scales = np.clip(d3, SCALE_CLAMP_LO * extent, SCALE_CLAMP_HI * extent)
    n = len(cloud)
    rotations = np.zeros((n, 4))
    rotations[:, 0] = 1.0
    return SplatScene(
        positions=cloud.positions.copy(),
        log_scales=np.log(scales)[:, None].repeat(3, axis=1),
        rotations=rotations,
        opacity_logits=np.full(n, float(logit(INIT_OPACITY))),
        colors=np.clip(cloud.colors, 0.0, 1.0),
        background=background,
        extent=extent,
    )


_PLY_FIELDS = [
    "x", "y", "z",
    "scale_0", "scale_1", "scale_2",
    "rot_0", "rot_1", "rot_2", "rot_3",
    "opacity",
    "red", "green", "blue",
]


def save_scene_ply(scene: SplatScene, path) -> None:
    """Checkpoint as ASCII PLY: position, log scales, quaternion, opacity logit, RGB."""
    path = Path(path)
    lines = ["ply", "format ascii 1.0", f"element vertex {len(scene)}"]
    lines += [f"property float {name}" for name in _PLY_FIELDS]
    lines.append("end_header")
    data = np.concatenate(
        [
            scene.positions,
            scene.log_scales,
            scene.rotations,
            scene.opacity_logits[:, None],
            scene.colors,
        ],
        axis=1,
    )
    for row in data:
        lines.append(" ".join(f"{v:.9g}" for v in row))
    path.write_text("\n".join(lines) + "\n")


def load_scene_ply(path, background=(0.0, 0.0, 0.0)) -> SplatScene:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise LoadError(f"cannot read {path}: {exc}") from exc
    lines = text.splitlines()
    if not lines or lines[0].strip() != "ply":
        raise LoadError(f"{path}: not a PLY file")
    count = None
    names = []
    body = None
    for i, line in enumerate(lines[1:], start=1):
        parts = line.split()
        if not parts:
            continue
        if parts[0] == "element" and parts[1] == "vertex":
            count = int(parts[2])
        elif parts[0] == "property":
            names.append(parts[2])
        elif parts[0] == "end_header":
            body = i + 1
            break
    if count is None or body is None or names != _PLY_FIELDS:
        raise LoadError(f"{path}: expected scene PLY with fields {_PLY_FIELDS}")
    data = np.array(
        [[float(t) for t in line.split()] for line in lines[body : body + count]],
        dtype=np.float64,
    ).reshape(count, len(_PLY_FIELDS))
    return SplatScene(
        positions=data[:, 0:3],
        log_scales=data[:, 3:6],
        rotations=data[:, 6:10],
        opacity_logits=data[:, 10],
        colors=np.clip(data[:, 11:14], 0.0, 1.0),
        background=background,
    )
