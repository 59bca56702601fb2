"""TUM-format trajectory and per-frame exposure files.

One line per pose: `timestamp tx ty tz qx qy qz qw`, space-separated, written
with 9 significant digits. Exposure files hold `frame_index exposure` lines.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .errors import LoadError
from .se3 import Se3Pose


def write_tum(path, poses: list[Se3Pose], timestamps=None) -> None:
    path = Path(path)
    if timestamps is None:
        timestamps = list(range(len(poses)))
    lines = []
    for ts, pose in zip(timestamps, poses):
        t = pose.translation
        w, x, y, z = pose.rotation
        fields = [float(ts), t[0], t[1], t[2], x, y, z, w]
        lines.append(" ".join(f"{v:.9g}" for v in fields))
    path.write_text("\n".join(lines) + "\n")


def read_tum(path) -> list[tuple[float, Se3Pose]]:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise LoadError(f"cannot read {path}: {exc}") from exc
    out = []
    for ln, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 8:
            raise LoadError(f"{path}:{ln}: expected 8 fields, got {len(parts)}")
        ts, tx, ty, tz, qx, qy, qz, qw = (float(p) for p in parts)
        out.append((ts, Se3Pose(np.array([qw, qx, qy, qz]), np.array([tx, ty, tz]))))
    return out


def write_exposures(path, exposures) -> None:
    lines = [f"{i} {float(e):.9g}" for i, e in enumerate(exposures)]
    Path(path).write_text("\n".join(lines) + "\n")


def read_exposures(path) -> np.ndarray:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise LoadError(f"cannot read {path}: {exc}") from exc
    pairs = []
    for ln, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 2:
            raise LoadError(f"{path}:{ln}: expected 'frame_index exposure'")
        pairs.append((int(parts[0]), float(parts[1])))
    pairs.sort()
    return np.array([e for _, e in pairs])
