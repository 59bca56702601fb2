"""Dataset directories: numbered PNG/PGM frames, intrinsics, optional trajectory
and exposures.

Layout written by `write_dataset` and consumed by `load_dataset`:

    frame_0000.png ...    8-bit frames, index order
    camera.txt            "fx fy cx cy width height"
    trajectory.txt        optional TUM ground truth, one line per frame
    exposures.txt         optional "frame_index exposure" lines
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..camera import PinholeCamera
from ..errors import LoadError
from ..image_io import load_image, save_png
from ..se3 import Se3Pose
from ..trajectory import read_exposures, read_tum, write_exposures, write_tum
from .synthetic import SyntheticScene

CAMERA_FILE = "camera.txt"
TRAJECTORY_FILE = "trajectory.txt"
EXPOSURE_FILE = "exposures.txt"


@dataclass
class LoadedDataset:
    colors: list[np.ndarray]  # (H, W, 3) float per frame
    camera: PinholeCamera
    trajectory: list[Se3Pose] | None
    exposures: np.ndarray

    def __len__(self) -> int:
        return len(self.colors)


def write_dataset(scene: SyntheticScene, out_dir) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for i, img in enumerate(scene.images):
        save_png(out / f"frame_{i:04d}.png", img)
    cam = scene.camera
    (out / CAMERA_FILE).write_text(
        f"{cam.fx:.9g} {cam.fy:.9g} {cam.cx:.9g} {cam.cy:.9g} {cam.width} {cam.height}\n"
    )
    write_tum(out / TRAJECTORY_FILE, scene.poses)
    write_exposures(out / EXPOSURE_FILE, scene.exposures)
    return out


def load_dataset(path) -> LoadedDataset:
    root = Path(path)
    if not root.is_dir():
        raise LoadError(f"dataset directory not found: {root}")
    frame_paths = sorted(root.glob("frame_*.png")) + sorted(root.glob("frame_*.pgm"))
    if not frame_paths:
        raise LoadError(f"no frame_*.png or frame_*.pgm files in {root}")
    cam_path = root / CAMERA_FILE
    if not cam_path.exists():
        raise LoadError(f"missing intrinsics file: {cam_path}")
    parts = cam_path.read_text().split()
    if len(parts) != 6:
        raise LoadError(f"{cam_path}: expected 'fx fy cx cy width height'")
    fx, fy, cx, cy = (float(p) for p in parts[:4])
    width, height = int(parts[4]), int(parts[5])
    camera = PinholeCamera(fx=fx, fy=fy, cx=cx, cy=cy, width=width, height=height)

    colors = []
    for fp in frame_paths:
        gray, color = load_image(fp)
        if gray.width != width or gray.height != height:
            raise LoadError(
                f"{fp}: image is {gray.width}x{gray.height}, intrinsics say {width}x{height}"
            )
        if color is None:
            color = np.repeat(gray.pixels[:, :, None], 3, axis=2)
        colors.append(color)

    trajectory = None
    traj_path = root / TRAJECTORY_FILE
    if traj_path.exists():
        poses = read_tum(traj_path)
        if len(poses) != len(colors):
            raise LoadError(
                f"{traj_path}: {len(poses)} poses for {len(colors)} frames"
            )
        trajectory = [p for _, p in poses]

    exposures = np.ones(len(colors))
    exp_path = root / EXPOSURE_FILE
    if exp_path.exists():
        exposures = read_exposures(exp_path)
        if len(exposures) != len(colors):
            raise LoadError(f"{exp_path}: {len(exposures)} exposures for {len(colors)} frames")

    return LoadedDataset(colors=colors, camera=camera, trajectory=trajectory, exposures=exposures)
