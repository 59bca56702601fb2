"""Seeded synthetic room scenes with exact ray-cast ground truth.

A textured cuboid room (five procedurally textured interior faces plus a flat
ceiling) is rendered by a direct ray/box caster, deliberately independent of
the splatting renderer so it can serve as an oracle. Each frame comes with a
color image, a metric depth map, the camera pose, and the face id per pixel.
A configurable fraction of each textured face is flattened to exercise
gradient-less fill.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..camera import PinholeCamera
from ..errors import InvalidArgumentError
from ..image_io import rgb_to_luma
from ..se3 import Se3Pose, matrix_to_quat

N_FACES = 6
CEILING_FACE = 5


@dataclass(frozen=True)
class SceneConfig:
    resolution: tuple[int, int] = (128, 128)  # (width, height)
    frame_count: int = 30
    texture_octaves: int = 5
    textureless_fraction: float = 0.0
    room_size: tuple[float, float, float] = (4.0, 2.6, 4.0)
    orbit_radius_fraction: float = 0.25  # of min horizontal room dimension
    orbit_degrees: float = 70.0
    orbit_start_degrees: float = -10.0
    texture_size: int = 256
    patch_grid: int = 8
    focal_fraction: float = 1.0

    def __post_init__(self):
        w, h = self.resolution
        if w < 64 or h < 64:
            raise InvalidArgumentError("resolution must be at least 64x64")
        if self.frame_count < 2:
            raise InvalidArgumentError("frame count must be at least 2")
        if not 0.0 <= self.textureless_fraction < 1.0:
            raise InvalidArgumentError("textureless fraction must be in [0, 1)")
        if self.texture_octaves < 1 or self.texture_size < 16:
            raise InvalidArgumentError("invalid texture configuration")
        if not 0.0 < self.orbit_radius_fraction < 0.5:
            raise InvalidArgumentError("orbit radius fraction must keep the camera inside")


@dataclass
class SyntheticScene:
    config: SceneConfig
    seed: int
    camera: PinholeCamera
    poses: list[Se3Pose]
    images: np.ndarray  # (N, H, W, 3) color in [0, 1]
    depths: np.ndarray  # (N, H, W) camera-frame z, strictly positive
    face_ids: np.ndarray  # (N, H, W) uint8
    exposures: np.ndarray  # (N,)

    def grays(self) -> list[np.ndarray]:
        return [rgb_to_luma(img) for img in self.images]


def _value_noise(rng: np.random.Generator, size: int, octaves: int) -> np.ndarray:
    """Octave value noise on [0, 1], bilinear lattice interpolation.

    The last octave acts as a boosted fine-detail layer so gradients stay
    selectable everywhere without washing out the coarse structure."""
    out = np.zeros((size, size))
    total = 0.0
    for o in range(octaves):
        n = 4 * 2**o + 1
        lattice = rng.random((n, n))
        coords = np.linspace(0.0, n - 1.0, size)
        i0 = np.clip(np.floor(coords).astype(int), 0, n - 2)
        f = coords - i0
        cols = lattice[:, i0] * (1 - f) + lattice[:, i0 + 1] * f  # (n, size)
        rows = cols[i0, :] * (1 - f)[:, None] + cols[i0 + 1, :] * f[:, None]
        amp = 0.12 if o == octaves - 1 and o >= 3 else 0.5**o
        out += amp * rows
        total += amp
    out /= total
    lo, hi = out.min(), out.max()
    return (out - lo) / max(hi - lo, 1e-12)


def _face_texture(rng: np.random.Generator, cfg: SceneConfig) -> np.ndarray:
    base = 0.55 + 0.45 * rng.random(3)  # tint only; brightness span comes from the noise
    noise = _value_noise(rng, cfg.texture_size, cfg.texture_octaves)
    rgb = (0.12 + 0.76 * noise)[:, :, None] * base[None, None, :]
    rgb = np.clip(rgb, 0.05, 0.95)
    n_patches = cfg.patch_grid * cfg.patch_grid
    n_flat = int(round(cfg.textureless_fraction * n_patches))
    if n_flat:
        chosen = rng.permutation(n_patches)[:n_flat]
        step = cfg.texture_size // cfg.patch_grid
        for c in chosen:
            py, px = divmod(int(c), cfg.patch_grid)
            y0, x0 = py * step, px * step
            region = rgb[y0 : y0 + step, x0 : x0 + step]
            region[:] = region.mean(axis=(0, 1))
    return rgb


def _sample_texture(tex: np.ndarray, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Bilinear texture lookup with uv in [0, 1]."""
    t = tex.shape[0]
    x = np.clip(u * (t - 1), 0.0, t - 1)
    y = np.clip(v * (t - 1), 0.0, t - 1)
    x0 = np.clip(np.floor(x).astype(int), 0, t - 2)
    y0 = np.clip(np.floor(y).astype(int), 0, t - 2)
    fx = (x - x0)[..., None]
    fy = (y - y0)[..., None]
    top = tex[y0, x0] * (1 - fx) + tex[y0, x0 + 1] * fx
    bot = tex[y0 + 1, x0] * (1 - fx) + tex[y0 + 1, x0 + 1] * fx
    return top + (bot - top) * fy


# face -> (axis, at_max_bound, u_axis, v_axis)
_FACES = (
    (0, False, 2, 1),  # x = 0
    (0, True, 2, 1),  # x = sx
    (2, False, 0, 1),  # z = 0
    (2, True, 0, 1),  # z = sz
    (1, True, 0, 2),  # y = sy (floor; +y points down)
    (1, False, 0, 2),  # y = 0 (flat ceiling)
)


def _orbit_pose(cfg: SceneConfig, theta: float) -> Se3Pose:
    sx, sy, sz = cfg.room_size
    center = np.array([sx / 2.0, sy / 2.0, sz / 2.0])
    radius = cfg.orbit_radius_fraction * min(sx, sz)
    pos = center + radius * np.array([np.cos(theta), 0.0, np.sin(theta)])
    forward = np.array([np.cos(theta), 0.0, np.sin(theta)])
    down = np.array([0.0, 1.0, 0.0])
    right = np.cross(down, forward)
    rot = np.stack([right, down, forward], axis=1)
    return Se3Pose(matrix_to_quat(rot), pos)


def _raycast(
    camera: PinholeCamera, pose: Se3Pose, cfg: SceneConfig, textures: list[np.ndarray]
):
    h, w = camera.height, camera.width
    us, vs = np.meshgrid(np.arange(w, dtype=np.float64), np.arange(h, dtype=np.float64))
    dirs_cam = np.stack(
        [(us - camera.cx) / camera.fx, (vs - camera.cy) / camera.fy, np.ones_like(us)], axis=-1
    )
    rot = pose.rotation_matrix()
    dirs = dirs_cam @ rot.T
    origin = pose.translation
    size = np.asarray(cfg.room_size)

    best_t = np.full((h, w), np.inf)
    face_id = np.zeros((h, w), dtype=np.uint8)
    best_uv = np.zeros((h, w, 2))
    eps = 1e-9
    for fi, (axis, at_max, ua, va) in enumerate(_FACES):
        bound = size[axis] if at_max else 0.0
        d = dirs[..., axis]
        safe_d = np.where(np.abs(d) > 1e-12, d, 1e-12)
        t = (bound - origin[axis]) / safe_d
        pu = origin[ua] + t * dirs[..., ua]
        pv = origin[va] + t * dirs[..., va]
        ok = (
            (np.abs(d) > 1e-12)
            & (t > eps)
            & (pu >= -1e-9)
            & (pu <= size[ua] + 1e-9)
            & (pv >= -1e-9)
            & (pv <= size[va] + 1e-9)
            & (t < best_t)
        )
        best_t = np.where(ok, t, best_t)
        face_id = np.where(ok, np.uint8(fi), face_id)
        best_uv[..., 0] = np.where(ok, pu / size[ua], best_uv[..., 0])
        best_uv[..., 1] = np.where(ok, pv / size[va], best_uv[..., 1])

    if not np.all(np.isfinite(best_t)):
        raise InvalidArgumentError("ray caster missed the room; camera outside the box?")
    color = np.zeros((h, w, 3))
    for fi in range(N_FACES):
        mask = face_id == fi
        if not np.any(mask):
            continue
        color[mask] = _sample_texture(textures[fi], best_uv[..., 0][mask], best_uv[..., 1][mask])
    # depth is the camera-frame z; the pixel ray has unit z in camera coordinates
    return color, best_t, face_id


def generate_synthetic_scene(seed: int, config: SceneConfig | None = None) -> SyntheticScene:
    """Deterministic room scene: same seed, bit-identical images and poses."""
    cfg = config or SceneConfig()
    rng = np.random.Generator(np.random.PCG64(seed))
    w, h = cfg.resolution
    camera = PinholeCamera(
        fx=w * cfg.focal_fraction,
        fy=w * cfg.focal_fraction,
        cx=(w - 1) / 2.0,
        cy=(h - 1) / 2.0,
        width=w,
        height=h,
    )
    textures = [_face_texture(rng, cfg) for _ in range(N_FACES - 1)]
    ceiling = np.full((2, 2, 3), 0.5)
    ceiling *= (0.4 + 0.5 * rng.random(3))[None, None, :]
    textures.append(np.clip(ceiling, 0.05, 0.95))

    thetas = np.deg2rad(
        cfg.orbit_start_degrees
        + np.linspace(0.0, cfg.orbit_degrees, cfg.frame_count)
    )
    poses = [_orbit_pose(cfg, float(t)) for t in thetas]
    size = np.asarray(cfg.room_size)
    for p in poses:
        if np.any(p.translation <= 0.0) or np.any(p.translation >= size):
            raise InvalidArgumentError("orbit leaves the room")

    images = np.empty((cfg.frame_count, h, w, 3))
    depths = np.empty((cfg.frame_count, h, w))
    face_ids = np.empty((cfg.frame_count, h, w), dtype=np.uint8)
    for i, pose in enumerate(poses):
        color, depth, fid = _raycast(camera, pose, cfg, textures)
        images[i] = color
        depths[i] = depth
        face_ids[i] = fid
    if depths.min() <= 0.0:
        raise InvalidArgumentError("non-positive ground-truth depth")
    return SyntheticScene(
        config=cfg,
        seed=seed,
        camera=camera,
        poses=poses,
        images=images,
        depths=depths,
        face_ids=face_ids,
        exposures=np.ones(cfg.frame_count),
    )
