"""Colored world-space point clouds and ASCII PLY I/O.

The status property encodes how a point was selected: 0 tracking, 1 extra
(position-only), 2 gradient-less fill.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .camera import PinholeCamera, backproject
from .errors import InvalidArgumentError, InvalidStateError, LoadError
from .odometry import PhotometricFrame, TrackedPoint
from .se3 import Se3Pose


@dataclass
class PointCloud:
    positions: np.ndarray  # (N, 3) world coordinates
    colors: np.ndarray  # (N, 3) in [0, 1]
    status: np.ndarray  # (N,) uint8

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=np.float64).reshape(-1, 3)
        self.colors = np.asarray(self.colors, dtype=np.float64).reshape(-1, 3)
        self.status = np.asarray(self.status, dtype=np.uint8).reshape(-1)
        if not (len(self.positions) == len(self.colors) == len(self.status)):
            raise InvalidArgumentError("point cloud arrays must have equal length")

    def __len__(self) -> int:
        return len(self.positions)


def export_point_cloud(
    cloud: list[TrackedPoint],
    camera: PinholeCamera,
    frames,
) -> PointCloud:
    """Backproject every tracked point into world space with color and status.

    `frames` maps a host frame id to its PhotometricFrame or Se3Pose.
    """
    positions = []
    colors = []
    status = []
    for p in cloud:
        if p.host_frame not in frames:
            raise InvalidStateError(f"no pose for host frame {p.host_frame}")
        entry = frames[p.host_frame]
        pose = entry.pose if isinstance(entry, PhotometricFrame) else entry
        if not isinstance(pose, Se3Pose):
            raise InvalidStateError(f"host frame {p.host_frame} entry has no pose")
        positions.append(backproject(p.u, p.v, p.inverse_depth, camera, pose))
        colors.append(p.color)
        status.append(int(p.status))
    return PointCloud(
        positions=np.array(positions).reshape(-1, 3),
        colors=np.array(colors).reshape(-1, 3),
        status=np.array(status, dtype=np.uint8),
    )


def write_ply(cloud: PointCloud, path) -> None:
    path = Path(path)
    lines = [
        "ply",
        "format ascii 1.0",
        f"element vertex {len(cloud)}",
        "property float x",
        "property float y",
        "property float z",
        "property uchar red",
        "property uchar green",
        "property uchar blue",
        "property uchar status",
        "end_header",
    ]
    rgb = np.clip(np.round(cloud.colors * 255.0), 0, 255).astype(np.uint8)
    for pos, c, s in zip(cloud.positions, rgb, cloud.status):
        lines.append(f"{pos[0]:.9g} {pos[1]:.9g} {pos[2]:.9g} {c[0]} {c[1]} {c[2]} {s}")
    path.write_text("\n".join(lines) + "\n")


def read_ply(path) -> PointCloud:
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
    body_start = None
    for i, line in enumerate(lines[1:], start=1):
        parts = line.split()
        if not parts:
            continue
        if parts[0] == "element" and parts[1] == "vertex":
            count = int(parts[2])
        elif parts[0] == "property":
            names.append(parts[2])
        elif parts[0] == "end_header":
            body_start = i + 1
            break
    if count is None or body_start is None:
        raise LoadError(f"{path}: malformed PLY header")
    required = ["x", "y", "z", "red", "green", "blue", "status"]
    if any(r not in names for r in required):
        raise LoadError(f"{path}: PLY must have properties {required}, found {names}")
    col = {n: i for i, n in enumerate(names)}
    rows = []
    for line in lines[body_start : body_start + count]:
        rows.append([float(t) for t in line.split()])
    data = np.array(rows, dtype=np.float64)
    if data.shape != (count, len(names)):
        raise LoadError(f"{path}: expected {count} vertices with {len(names)} properties")
    positions = data[:, [col["x"], col["y"], col["z"]]]
    colors = data[:, [col["red"], col["green"], col["blue"]]] / 255.0
    status = data[:, col["status"]].astype(np.uint8)
    return PointCloud(positions=positions, colors=colors, status=status)
