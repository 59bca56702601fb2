import numpy as np
import pytest

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


from photosplat.camera import PinholeCamera
from photosplat.harness.synthetic import SceneConfig, generate_synthetic_scene
from photosplat.image import IntensityImage
from photosplat.splat.model import SplatScene


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def small_camera():
    return PinholeCamera(fx=35.0, fy=33.0, cx=15.5, cy=15.5, width=32, height=32)


@pytest.fixture(scope="session")
def tiny_scene():
    """Small fully-textured room shared by tests that only read it."""
    return generate_synthetic_scene(
        5, SceneConfig(resolution=(96, 96), frame_count=4, orbit_degrees=6.0)
    )


def random_splat_scene(seed: int, n: int = 8, background=(0.15, 0.2, 0.25)) -> SplatScene:
    """Well-conditioned random scene for gradient and oracle checks: Gaussians
    in front of the camera, opacities away from the 0.99 clamp."""
    gen = np.random.default_rng(seed)
    positions = np.stack(
        [gen.uniform(-0.7, 0.7, n), gen.uniform(-0.7, 0.7, n), gen.uniform(1.5, 3.0, n)], axis=1
    )
    log_scales = np.log(gen.uniform(0.05, 0.2, (n, 3)))
    rotations = gen.normal(size=(n, 4))
    rotations /= np.linalg.norm(rotations, axis=1, keepdims=True)
    logits = gen.uniform(-1.5, 1.2, n)
    colors = gen.uniform(0.1, 0.9, (n, 3))
    return SplatScene(positions, log_scales, rotations, logits, colors, background=background)


def noise_image(seed: int, width: int = 64, height: int = 64, octaves: int = 3) -> IntensityImage:
    """Smooth multi-octave noise image in [0.1, 0.9]."""
    gen = np.random.default_rng(seed)
    out = np.zeros((height, width))
    total = 0.0
    for o in range(octaves):
        cells = 4 * 2**o + 1
        lattice = gen.random((cells, cells))
        ys = np.linspace(0, cells - 1, height)
        xs = np.linspace(0, cells - 1, width)
        x0 = np.clip(np.floor(xs).astype(int), 0, cells - 2)
        y0 = np.clip(np.floor(ys).astype(int), 0, cells - 2)
        fx = xs - x0
        fy = (ys - y0)[:, None]
        cols = lattice[:, x0] * (1 - fx) + lattice[:, x0 + 1] * fx
        grid = cols[y0, :] * (1 - fy) + cols[y0 + 1, :] * fy
        amp = 0.5**o
        out += amp * grid
        total += amp
    out /= total
    lo, hi = out.min(), out.max()
    return IntensityImage(0.1 + 0.8 * (out - lo) / max(hi - lo, 1e-9))
