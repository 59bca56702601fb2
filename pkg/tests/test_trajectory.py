import numpy as np
import pytest

from photosplat.errors import LoadError
from photosplat.se3 import se3_exp
from photosplat.trajectory import read_exposures, read_tum, write_exposures, write_tum


def test_tum_round_trip(tmp_path, rng):
    poses = [se3_exp(rng.uniform(-1, 1, 6)) for _ in range(8)]
    path = tmp_path / "traj.txt"
    write_tum(path, poses)
    back = read_tum(path)
    assert [ts for ts, _ in back] == [float(i) for i in range(8)]
    for (_, got), want in zip(back, poses):
        delta = got.inverse() @ want
        assert delta.rotation_angle() < 1e-7
        assert np.linalg.norm(delta.translation) < 1e-7


def test_tum_format_fields(tmp_path):
    pose = se3_exp(np.array([0.1, 0.2, 0.3, 0.04, 0.05, 0.06]))
    path = tmp_path / "traj.txt"
    write_tum(path, [pose], timestamps=[12])
    line = path.read_text().strip()
    parts = line.split(" ")
    assert len(parts) == 8
    assert float(parts[0]) == 12.0
    # order is tx ty tz qx qy qz qw
    np.testing.assert_allclose([float(p) for p in parts[1:4]], pose.translation, rtol=1e-8)
    w, x, y, z = pose.rotation
    np.testing.assert_allclose([float(p) for p in parts[4:]], [x, y, z, w], rtol=1e-8, atol=1e-12)


def test_tum_rejects_bad_lines(tmp_path):
    path = tmp_path / "traj.txt"
    path.write_text("0 1 2 3\n")
    with pytest.raises(LoadError):
        read_tum(path)


def test_exposure_round_trip(tmp_path):
    path = tmp_path / "exp.txt"
    write_exposures(path, [1.0, 0.5, 2.0])
    np.testing.assert_allclose(read_exposures(path), [1.0, 0.5, 2.0])
    assert path.read_text().splitlines()[1] == "1 0.5"
