"""Adam optimization of splat scenes, one parameter group per Gaussian attribute.

Update rule (first-moment / second-moment with bias correction, epsilon added
outside the square root):

    m = b1 m + (1 - b1) g;  v = b2 v + (1 - b2) g^2
    theta -= lr * (m / (1 - b1^t)) / (sqrt(v / (1 - b2^t)) + eps)

The position learning rate is scaled by the scene extent so step sizes stay
resolution- and unit-independent.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..camera import PinholeCamera
from ..errors import InvalidArgumentError, InvalidStateError
from ..se3 import Se3Pose
from .metrics import loss_and_gradient
from .model import SplatScene
from .render import RenderGrads, render_backward, render_with_aux

PARAM_GROUPS = ("position", "log_scale", "rotation", "opacity_logit", "color")


@dataclass(frozen=True)
class TrainConfig:
    iterations: int = 640
    lr_position: float = 1.6e-4  # scaled by scene extent at use
    lr_log_scale: float = 5e-3
    lr_rotation: float = 1e-3
    lr_opacity: float = 5e-2
    lr_color: float = 2.5e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-15
    densify_interval: int = 100
    densify_grad_threshold: float = 2e-4
    densify_scale_fraction: float = 0.01  # split rather than clone above this * extent
    prune_opacity_threshold: float = 0.005
    prune_scale_threshold: float = 0.5  # times scene extent
    l1_weight: float = 0.8
    ssim_weight: float = 0.2
    ssim_window: int = 11
    ssim_sigma: float = 1.5
    render_dtype: str = "float32"  # fast path; tests drive the renderer in float64

    def __post_init__(self):
        for name in ("lr_position", "lr_log_scale", "lr_rotation", "lr_opacity", "lr_color"):
            if getattr(self, name) <= 0:
                raise InvalidArgumentError(f"{name} must be positive")
        if self.iterations < 1 or self.densify_interval < 1:
            raise InvalidArgumentError("iteration counts must be at least 1")

    def learning_rate(self, group: str, extent: float) -> float:
        if group == "position":
            return self.lr_position * extent
        return {
            "log_scale": self.lr_log_scale,
            "rotation": self.lr_rotation,
            "opacity_logit": self.lr_opacity,
            "color": self.lr_color,
        }[group]


class TrainerState:
    """Adam moments per parameter group plus densification statistics."""

    def __init__(self, scene: SplatScene):
        n = len(scene)
        self.step_count = 0
        self.m = {g: np.zeros_like(getattr(scene, _attr(g))) for g in PARAM_GROUPS}
        self.v = {g: np.zeros_like(getattr(scene, _attr(g))) for g in PARAM_GROUPS}
        self.grad_accum = np.zeros(n)
        self.grad_count = np.zeros(n)

    def remap(self, keep: np.ndarray, appended: int) -> None:
        """Keep-mask plus zero-state rows for newly added Gaussians."""
        for g in PARAM_GROUPS:
            kept_m = self.m[g][keep]
            kept_v = self.v[g][keep]
            pad = (appended,) + kept_m.shape[1:]
            self.m[g] = np.concatenate([kept_m, np.zeros(pad)], axis=0)
            self.v[g] = np.concatenate([kept_v, np.zeros(pad)], axis=0)
        n = len(self.grad_accum[keep]) + appended
        self.grad_accum = np.zeros(n)
        self.grad_count = np.zeros(n)

    def reset_densify_stats(self) -> None:
        self.grad_accum[:] = 0.0
        self.grad_count[:] = 0.0


def _attr(group: str) -> str:
    return {
        "position": "positions",
        "log_scale": "log_scales",
        "rotation": "rotations",
        "opacity_logit": "opacity_logits",
        "color": "colors",
    }[group]


def adam_update(
    param: np.ndarray,
    grad: np.ndarray,
    m: np.ndarray,
    v: np.ndarray,
    lr: float,
    beta1: float,
    beta2: float,
    eps: float,
    t: int,
) -> None:
    """One in-place Adam step; t is the 1-based step index."""
    m *= beta1
    m += (1.0 - beta1) * grad
    v *= beta2
    v += (1.0 - beta2) * grad * grad
    m_hat = m / (1.0 - beta1**t)
    v_hat = v / (1.0 - beta2**t)
    param -= lr * m_hat / (np.sqrt(v_hat) + eps)


def train_step(
    scene: SplatScene,
    target: np.ndarray,
    camera: PinholeCamera,
    view_pose: Se3Pose,
    state: TrainerState,
    config: TrainConfig,
) -> float:
    """Render, compare against the target, and apply one Adam update per group."""
    if len(scene) == 0:
        raise InvalidStateError("cannot train an empty scene")
    target = np.asarray(target, dtype=np.float64)
    if target.shape != (camera.height, camera.width, 3):
        raise InvalidArgumentError(
            f"target shape {target.shape} does not match camera "
            f"{(camera.height, camera.width, 3)}"
        )
    rendered, _, aux = render_with_aux(scene, camera, view_pose, dtype=np.dtype(config.render_dtype))
    loss, up = loss_and_gradient(
        rendered, target,
        l1_weight=config.l1_weight, ssim_weight=config.ssim_weight,
        window=config.ssim_window, sigma=config.ssim_sigma,
    )
    if not np.isfinite(loss):
        bad = _first_nonfinite(rendered)
        raise InvalidStateError(f"non-finite loss (first bad pixel {bad})")
    grads = render_backward(scene, camera, view_pose, up, aux=aux)
    _check_grads(grads)

    state.step_count += 1
    t = state.step_count
    for group in PARAM_GROUPS:
        param = getattr(scene, _attr(group))
        grad = getattr(grads, group)
        adam_update(
            param, grad, state.m[group], state.v[group],
            config.learning_rate(group, scene.extent),
            config.beta1, config.beta2, config.eps, t,
        )
    scene.normalize_rotations()
    np.clip(scene.colors, 0.0, 1.0, out=scene.colors)
    scene.assert_finite()

    norms = np.linalg.norm(grads.mean2d, axis=1)
    state.grad_accum += np.where(grads.visible, norms, 0.0)
    state.grad_count += grads.visible.astype(np.float64)
    return loss


def _check_grads(grads: RenderGrads) -> None:
    for group in PARAM_GROUPS:
        arr = getattr(grads, group)
        if not np.all(np.isfinite(arr)):
            flat = np.isfinite(arr).reshape(arr.shape[0], -1).all(axis=1)
            bad = int(np.nonzero(~flat)[0][0])
            raise InvalidStateError(f"non-finite {group} gradient at Gaussian {bad}")


def _first_nonfinite(arr: np.ndarray):
    idx = np.argwhere(~np.isfinite(arr))
    return tuple(idx[0]) if len(idx) else None
