from .densify import DensifyReport, densify_and_prune
from .metrics import loss_and_gradient, psnr, ssim
from .model import Gaussian3d, SplatScene, init_from_point_cloud, load_scene_ply, save_scene_ply
from .optim import TrainConfig, TrainerState, train_step
from .projection import ProjectedGaussian, project_gaussian
from .render import render, render_backward

__all__ = [
    "DensifyReport",
    "densify_and_prune",
    "Gaussian3d",
    "SplatScene",
    "init_from_point_cloud",
    "load_scene_ply",
    "loss_and_gradient",
    "ProjectedGaussian",
    "project_gaussian",
    "psnr",
    "render",
    "render_backward",
    "save_scene_ply",
    "ssim",
    "TrainConfig",
    "TrainerState",
    "train_step",
]
