"""Adaptive density control: clone small / split large high-gradient Gaussians,
prune transparent or oversized ones.

Splitting replaces the parent with two children offset by one standard
deviation along the largest principal axis, scales divided by 1.6; cloning
duplicates in place (the copy diverges through its fresh optimizer state).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import EmptySceneError
from .model import SplatScene, sigmoid
from .optim import TrainConfig, TrainerState
from .projection import _quat_to_matrix_batch

SPLIT_SCALE_DIVISOR = 1.6


@dataclass(frozen=True)
class DensifyReport:
    cloned: int
    split: int
    pruned: int


def densify_and_prune(
    scene: SplatScene,
    state: TrainerState,
    config: TrainConfig,
) -> DensifyReport:
    """Mutates the scene (and optimizer state) in place; resets the gradient stats."""
    n = len(scene)
    mean_grad = state.grad_accum / np.maximum(state.grad_count, 1.0)
    scales = scene.scales()
    max_scale = scales.max(axis=1)
    opacity = sigmoid(scene.opacity_logits)

    high = mean_grad > config.densify_grad_threshold
    large = max_scale > config.densify_scale_fraction * scene.extent
    split_mask = high & large
    clone_mask = high & ~large
    prune_mask = (opacity < config.prune_opacity_threshold) | (
        max_scale > config.prune_scale_threshold * scene.extent
    )
    # split parents are replaced by their children
    keep = ~(prune_mask | split_mask)

    new_positions = []
    new_log_scales = []
    new_rotations = []
    new_logits = []
    new_colors = []

    clone_idx = np.nonzero(clone_mask & ~prune_mask)[0]
    if clone_idx.size:
        new_positions.append(scene.positions[clone_idx])
        new_log_scales.append(scene.log_scales[clone_idx])
        new_rotations.append(scene.rotations[clone_idx])
        new_logits.append(scene.opacity_logits[clone_idx])
        new_colors.append(scene.colors[clone_idx])

    split_idx = np.nonzero(split_mask & ~prune_mask)[0]
    if split_idx.size:
        rot = _quat_to_matrix_batch(scene.rotations[split_idx])
        s = scales[split_idx]
        axis = np.argmax(s, axis=1)
        rows = np.arange(split_idx.size)
        offset = rot[rows, :, axis] * s[rows, axis][:, None]
        child_scales = scene.log_scales[split_idx] - np.log(SPLIT_SCALE_DIVISOR)
        for sign in (1.0, -1.0):
            new_positions.append(scene.positions[split_idx] + sign * offset)
            new_log_scales.append(child_scales)
            new_rotations.append(scene.rotations[split_idx])
            new_logits.append(scene.opacity_logits[split_idx])
            new_colors.append(scene.colors[split_idx])

    appended = sum(len(a) for a in new_positions)
    kept = int(keep.sum())
    if kept + appended == 0:
        raise EmptySceneError("densify/prune would remove every Gaussian")

    def stack(kept_arr, extra_list):
        if extra_list:
            return np.concatenate([kept_arr] + extra_list, axis=0)
        return kept_arr.copy()

    scene.positions = stack(scene.positions[keep], new_positions)
    scene.log_scales = stack(scene.log_scales[keep], new_log_scales)
    scene.rotations = stack(scene.rotations[keep], new_rotations)
    scene.opacity_logits = stack(scene.opacity_logits[keep], new_logits)
    scene.colors = stack(scene.colors[keep], new_colors)
    scene.normalize_rotations()
    scene.assert_finite()

    state.remap(keep, appended)
    state.reset_densify_stats()
    return DensifyReport(
        cloned=int(clone_idx.size), split=int(split_idx.size), pruned=int(prune_mask.sum())
    )
