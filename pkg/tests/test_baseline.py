import numpy as np
import pytest

from photosplat.errors import InvalidArgumentError
from photosplat.harness.baseline import make_sparse_baseline
from photosplat.odometry import PointStatus, TrackedPoint


def make_cloud(n_track=1000, n_extra=50, n_fill=30):
    cloud = []
    for i in range(n_track):
        cloud.append(TrackedPoint(0, float(i % 100), float(i // 100), 1.0,
                                  PointStatus.POSE_TRACKING))
    for i in range(n_extra):
        cloud.append(TrackedPoint(0, float(i), 50.0, 1.0, PointStatus.POSITION_ONLY))
    for i in range(n_fill):
        cloud.append(TrackedPoint(0, float(i), 60.0, 1.0, PointStatus.GRADIENT_FILL))
    return cloud


def test_tracking_only_filters_statuses():
    out = make_sparse_baseline(make_cloud(), "tracking-only")
    assert len(out) == 1000
    assert all(p.status == PointStatus.POSE_TRACKING for p in out)


def test_ratio_one_on_tracking_only_input_is_identity():
    cloud = [p for p in make_cloud(200, 0, 0)]
    out = make_sparse_baseline(cloud, "ratio", ratio=1.0, seed=3)
    assert {id(p) for p in out} == {id(p) for p in cloud}


def test_ratio_exact_count_without_replacement():
    out = make_sparse_baseline(make_cloud(1000, 10, 10), "ratio", ratio=0.25, seed=0)
    assert len(out) == 250
    assert len({id(p) for p in out}) == 250
    assert all(p.status == PointStatus.POSE_TRACKING for p in out)


def test_ratio_seeded_deterministic():
    cloud = make_cloud(400, 0, 0)
    a = make_sparse_baseline(cloud, "ratio", ratio=0.5, seed=7)
    b = make_sparse_baseline(cloud, "ratio", ratio=0.5, seed=7)
    assert [id(p) for p in a] == [id(p) for p in b]
    c = make_sparse_baseline(cloud, "ratio", ratio=0.5, seed=8)
    assert [id(p) for p in a] != [id(p) for p in c]


def test_empty_result_rejected():
    fill_only = [TrackedPoint(0, 1.0, 1.0, 1.0, PointStatus.GRADIENT_FILL)]
    with pytest.raises(InvalidArgumentError):
        make_sparse_baseline(fill_only, "tracking-only")


def test_invalid_mode_and_ratio():
    cloud = make_cloud(10, 0, 0)
    with pytest.raises(InvalidArgumentError):
        make_sparse_baseline(cloud, "colmap")
    with pytest.raises(InvalidArgumentError):
        make_sparse_baseline(cloud, "ratio", ratio=0.0)
