import numpy as np
import pytest

from photosplat.errors import InvalidArgumentError
from photosplat.harness.synthetic import (
    CEILING_FACE,
    SceneConfig,
    generate_synthetic_scene,
)
from photosplat.image import IntensityImage, gradient_magnitude_map
from photosplat.image_io import rgb_to_luma


def test_same_seed_bit_identical():
    cfg = SceneConfig(resolution=(96, 96), frame_count=3, textureless_fraction=0.2)
    a = generate_synthetic_scene(9, cfg)
    b = generate_synthetic_scene(9, cfg)
    assert np.array_equal(a.images, b.images)
    assert np.array_equal(a.depths, b.depths)
    for pa, pb in zip(a.poses, b.poses):
        assert np.array_equal(pa.rotation, pb.rotation)
        assert np.array_equal(pa.translation, pb.translation)


def test_different_seed_differs():
    cfg = SceneConfig(resolution=(96, 96), frame_count=2)
    a = generate_synthetic_scene(1, cfg)
    b = generate_synthetic_scene(2, cfg)
    assert not np.array_equal(a.images, b.images)


def test_depth_matches_analytic_plane_distance():
    """The ray through each pixel hits an axis-aligned wall; camera-frame depth
    must equal the analytic ray/plane intersection distance."""
    cfg = SceneConfig(resolution=(96, 96), frame_count=2, orbit_degrees=4.0)
    scene = generate_synthetic_scene(4, cfg)
    cam = scene.camera
    pose = scene.poses[0]
    rot = pose.rotation_matrix()
    origin = pose.translation
    size = np.asarray(cfg.room_size)
    gen = np.random.default_rng(0)
    checked = 0
    for _ in range(300):
        u = int(gen.integers(0, cam.width))
        v = int(gen.integers(0, cam.height))
        direction = rot @ np.array([(u - cam.cx) / cam.fx, (v - cam.cy) / cam.fy, 1.0])
        face = int(scene.face_ids[0, v, u])
        axis = (0, 0, 2, 2, 1, 1)[face]
        bound = (0.0, size[0], 0.0, size[2], size[1], 0.0)[face]
        if abs(direction[axis]) < 1e-9:
            continue
        t = (bound - origin[axis]) / direction[axis]
        assert scene.depths[0, v, u] == pytest.approx(t, abs=1e-6)
        checked += 1
    assert checked > 250


def test_textureless_fraction_census():
    """About the configured fraction of wall pixels has zero local texture
    gradient. A full-circle orbit averages out per-view coverage variation;
    the flat ceiling is excluded, and patch-boundary blending biases the
    census slightly below the configured fraction."""
    cfg = SceneConfig(
        resolution=(128, 128), frame_count=12, textureless_fraction=0.3, orbit_degrees=300.0
    )
    scene = generate_synthetic_scene(11, cfg)
    fracs = []
    for i in range(cfg.frame_count):
        gray = IntensityImage(rgb_to_luma(scene.images[i]))
        grad = gradient_magnitude_map(gray)
        wall = (scene.face_ids[i] != CEILING_FACE)[1:-1, 1:-1]
        flat = grad[1:-1, 1:-1] < 1e-9
        fracs.append(float(flat[wall].mean()))
    frac = float(np.mean(fracs))
    assert 0.18 <= frac <= 0.42


def test_zero_textureless_has_gradient_everywhere_mostly():
    cfg = SceneConfig(resolution=(128, 128), frame_count=2, textureless_fraction=0.0)
    scene = generate_synthetic_scene(11, cfg)
    gray = IntensityImage(rgb_to_luma(scene.images[0]))
    grad = gradient_magnitude_map(gray)
    wall = (scene.face_ids[0] != CEILING_FACE)[1:-1, 1:-1]
    flat = grad[1:-1, 1:-1] < 1e-9
    assert float(flat[wall].mean()) < 0.02


def test_poses_inside_room_and_depths_positive():
    cfg = SceneConfig(resolution=(96, 96), frame_count=5)
    scene = generate_synthetic_scene(0, cfg)
    size = np.asarray(cfg.room_size)
    for pose in scene.poses:
        assert np.all(pose.translation > 0) and np.all(pose.translation < size)
    assert scene.depths.min() > 0


def test_invalid_configs_rejected():
    with pytest.raises(InvalidArgumentError):
        SceneConfig(resolution=(32, 128))
    with pytest.raises(InvalidArgumentError):
        SceneConfig(frame_count=1)
    with pytest.raises(InvalidArgumentError):
        SceneConfig(textureless_fraction=1.0)
