"""Photometric odometry feeding a differentiable CPU Gaussian-splatting trainer.

Pipeline: track high-gradient pixels directly on image intensities, densify
the resulting point cloud with position-only and gradient-less fill points,
then initialize and train a 3-D Gaussian splat scene from the cloud and poses.
"""

__version__ = "0.1.0"

from .camera import PinholeCamera, backproject, project
from .errors import (
    BehindCameraError,
    EmptySceneError,
    InsufficientTextureError,
    InvalidArgumentError,
    InvalidDepthError,
    InvalidStateError,
    LoadError,
    NotVisibleError,
    OutOfBoundsError,
    PhotosplatError,
    TrackingLostError,
)
from .image import ImagePyramid, IntensityImage, bilinear_sample, build_pyramid, image_gradient
from .se3 import Se3Pose, se3_exp, se3_log

__all__ = [
    "PinholeCamera",
    "project",
    "backproject",
    "Se3Pose",
    "se3_exp",
    "se3_log",
    "IntensityImage",
    "ImagePyramid",
    "bilinear_sample",
    "build_pyramid",
    "image_gradient",
    "PhotosplatError",
    "InvalidArgumentError",
    "BehindCameraError",
    "InvalidDepthError",
    "OutOfBoundsError",
    "NotVisibleError",
    "InsufficientTextureError",
    "TrackingLostError",
    "InvalidStateError",
    "EmptySceneError",
    "LoadError",
]
