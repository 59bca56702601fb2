"""Exception hierarchy. CLI exit codes: 2 invalid arguments/config, 3 tracking lost, 4 I/O."""


class PhotosplatError(Exception):
    """Base class for all package errors."""


class InvalidArgumentError(PhotosplatError):
    """Bad argument, configuration value, or precondition violation."""


class BehindCameraError(PhotosplatError):
    """Point has non-positive depth in the camera frame."""


class InvalidDepthError(PhotosplatError):
    """Inverse depth outside its valid range."""


class OutOfBoundsError(PhotosplatError):
    """Sample coordinates outside the image domain."""


class NotVisibleError(PhotosplatError):
    """Warped point falls behind the camera or outside the target frame."""


class InsufficientTextureError(PhotosplatError):
    """Too few gradient candidates to select tracking pixels."""


class TrackingLostError(PhotosplatError):
    """Frame alignment failed (too few points or diverging optimization)."""

    def __init__(self, message: str, frame_index: int | None = None):
        super().__init__(message)
        self.frame_index = frame_index


class InvalidStateError(PhotosplatError):
    """Operation requires state that is missing or inconsistent."""


class EmptySceneError(PhotosplatError):
    """A splat scene lost all of its Gaussians."""


class LoadError(PhotosplatError):
    """Dataset or file could not be read or is malformed."""
