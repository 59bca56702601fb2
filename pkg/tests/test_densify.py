import numpy as np
import pytest

from photosplat.camera import PinholeCamera
from photosplat.errors import EmptySceneError
from photosplat.se3 import Se3Pose
from photosplat.splat.densify import densify_and_prune
from photosplat.splat.model import SplatScene, logit
from photosplat.splat.optim import TrainConfig, TrainerState, train_step
from photosplat.splat.render import render
from conftest import random_splat_scene


def test_noop_when_no_signal():
    scene = random_splat_scene(1, n=10)
    scene.opacity_logits[:] = 1.0
    state = TrainerState(scene)
    report = densify_and_prune(scene, state, TrainConfig())
    assert (report.cloned, report.split, report.pruned) == (0, 0, 0)
    assert len(scene) == 10


def test_low_opacity_pruned():
    scene = random_splat_scene(2, n=5)
    scene.opacity_logits[:] = 1.0
    scene.opacity_logits[3] = logit(0.001)
    state = TrainerState(scene)
    report = densify_and_prune(scene, state, TrainConfig())
    assert report.pruned == 1
    assert len(scene) == 4
    assert len(state.m["position"]) == 4


def test_oversized_pruned():
    scene = random_splat_scene(3, n=4)
    scene.opacity_logits[:] = 1.0
    scene.log_scales[1] = np.log([scene.extent, 0.01, 0.01])
    state = TrainerState(scene)
    cfg = TrainConfig(prune_scale_threshold=0.5)
    report = densify_and_prune(scene, state, cfg)
    assert report.pruned == 1
    assert len(scene) == 3


def test_clone_small_split_large():
    scene = random_splat_scene(4, n=4)
    scene.opacity_logits[:] = 1.0
    extent = scene.extent
    # gaussian 0 small (clone), gaussian 1 large (split)
    scene.log_scales[0] = np.log([0.001 * extent] * 3)
    scene.log_scales[1] = np.log([0.05 * extent] * 3)
    state = TrainerState(scene)
    state.grad_accum[:2] = 1.0  # mean gradient 1.0 >> threshold
    state.grad_count[:2] = 1.0
    cfg = TrainConfig(densify_grad_threshold=1e-3, densify_scale_fraction=0.01)
    report = densify_and_prune(scene, state, cfg)
    assert report.cloned == 1
    assert report.split == 1
    # 4 - 1 split parent + 1 clone + 2 children
    assert len(scene) == 6
    # split children offset by +-1 sigma along the major axis, scales / 1.6
    child_scales = np.exp(scene.log_scales[-2:])
    np.testing.assert_allclose(child_scales, 0.05 * extent / 1.6, rtol=1e-12)
    assert np.linalg.norm(scene.positions[-1] - scene.positions[-2]) == pytest.approx(
        2 * 0.05 * extent, rel=1e-9
    )
    # optimizer state resized and stats reset
    assert len(state.m["position"]) == 6
    assert state.grad_accum.shape == (6,)
    assert state.grad_accum.max() == 0.0


def test_prune_everything_raises():
    scene = random_splat_scene(5, n=3)
    scene.opacity_logits[:] = logit(0.0001)
    state = TrainerState(scene)
    with pytest.raises(EmptySceneError):
        densify_and_prune(scene, state, TrainConfig())


def test_never_increases_subthreshold_opacity_count():
    scene = random_splat_scene(6, n=20)
    state = TrainerState(scene)
    cfg = TrainConfig()
    before = int((scene.opacities() < cfg.prune_opacity_threshold).sum())
    densify_and_prune(scene, state, cfg)
    after = int((scene.opacities() < cfg.prune_opacity_threshold).sum())
    assert after <= before
    scene.assert_finite()


def test_two_view_fit_densifies_undercovered_regions(small_camera):
    """A sparse init fitting a two-Gaussian target gains Gaussians within the
    first densify events."""
    target_scene = random_splat_scene(7, n=12)
    target_a, _ = render(target_scene, small_camera, Se3Pose.identity())
    pose_b = Se3Pose(np.array([1.0, 0, 0, 0]), np.array([0.08, 0.0, 0.0]))
    target_b, _ = render(target_scene, small_camera, pose_b)

    scene = random_splat_scene(8, n=3)
    state = TrainerState(scene)
    cfg = TrainConfig(densify_interval=40, densify_grad_threshold=5e-6)
    grown = 0
    for it in range(1, 161):
        view = it % 2
        train_step(scene, target_a if view == 0 else target_b, small_camera,
                   Se3Pose.identity() if view == 0 else pose_b, state, cfg)
        if it % cfg.densify_interval == 0:
            report = densify_and_prune(scene, state, cfg)
            grown += report.cloned + report.split
    assert grown > 0
