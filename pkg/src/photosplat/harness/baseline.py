"""Sparse initializer emulation: subsample the dense cloud's tracking points.

Structure-from-motion baselines produce sparse feature clouds; at desk scale
that variable (initial density/coverage) is reproduced by keeping only the
pose-tracking points, optionally thinned to a seeded random fraction.
"""

from __future__ import annotations

import numpy as np

from ..errors import InvalidArgumentError
from ..odometry import PointStatus, TrackedPoint

MODES = ("tracking-only", "ratio")


def make_sparse_baseline(
    cloud: list[TrackedPoint],
    mode: str = "tracking-only",
    ratio: float | None = None,
    seed: int = 0,
) -> list[TrackedPoint]:
    """Keep tracking points only; mode "ratio" keeps a seeded random fraction
    of them, chosen without replacement (exact count round(ratio * n))."""
    if mode not in MODES:
        raise InvalidArgumentError(f"mode must be one of {MODES}, got {mode!r}")
    tracking = [p for p in cloud if p.status == PointStatus.POSE_TRACKING]
    if mode == "tracking-only":
        result = list(tracking)
    else:
        if ratio is None or not 0.0 < ratio <= 1.0:
            raise InvalidArgumentError("ratio mode needs 0 < ratio <= 1")
        n = len(tracking)
        keep = int(round(ratio * n))
        rng = np.random.Generator(np.random.PCG64(seed))
        chosen = np.sort(rng.choice(n, size=keep, replace=False)) if n else np.array([], int)
        result = [tracking[i] for i in chosen]
    if not result:
        raise InvalidArgumentError("sparse baseline is empty")
    return result
