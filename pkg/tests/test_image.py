import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from photosplat.errors import InvalidArgumentError, OutOfBoundsError
from photosplat.image import (
    IntensityImage,
    bilinear_sample,
    build_pyramid,
    gradient_magnitude_map,
    image_gradient,
)
from oracles import bilinear_nested_loops, box_downsample_loops


def checker(n=8):
    img = np.indices((n, n)).sum(axis=0) % 2
    return IntensityImage(img.astype(np.float64))


class TestIntensityImage:
    def test_validates_range(self):
        with pytest.raises(InvalidArgumentError):
            IntensityImage(np.array([[0.0, 1.5]]))
        with pytest.raises(InvalidArgumentError):
            IntensityImage(np.array([[0.0, np.nan]]))

    def test_pixels_read_only(self):
        img = IntensityImage(np.zeros((4, 4)))
        with pytest.raises(ValueError):
            img.pixels[0, 0] = 1.0


class TestBilinearSample:
    def test_exact_at_lattice(self, rng):
        img = IntensityImage(rng.uniform(0, 1, (6, 7)))
        for v in range(6):
            for u in range(7):
                assert bilinear_sample(img, u, v) == img.pixels[v, u]

    def test_midpoint_of_step(self):
        img = IntensityImage(np.array([[0.0, 1.0], [0.0, 1.0]]))
        assert bilinear_sample(img, 0.5, 0.5) == pytest.approx(0.5)
        assert bilinear_sample(img, 0.5, 0.0) == pytest.approx(0.5)

    def test_matches_nested_loop_oracle(self, rng):
        img = IntensityImage(rng.uniform(0, 1, (9, 11)))
        for _ in range(200):
            u = rng.uniform(0, 10)
            v = rng.uniform(0, 8)
            assert bilinear_sample(img, u, v) == pytest.approx(
                bilinear_nested_loops(img.pixels, u, v), abs=1e-12
            )

    def test_out_of_bounds_raises(self):
        img = IntensityImage(np.zeros((4, 4)))
        with pytest.raises(OutOfBoundsError):
            bilinear_sample(img, -0.1, 0.0)
        with pytest.raises(OutOfBoundsError):
            bilinear_sample(img, 0.0, 3.01)

    @settings(max_examples=50, deadline=None)
    @given(st.floats(0, 4), st.floats(0, 3))
    def test_bounded_by_neighbors(self, u, v):
        gen = np.random.default_rng(99)
        img = IntensityImage(gen.uniform(0, 1, (4, 5)))
        x0 = min(int(np.floor(u)), 3)
        y0 = min(int(np.floor(v)), 2)
        corners = img.pixels[y0 : y0 + 2, x0 : x0 + 2]
        value = bilinear_sample(img, u, v)
        assert corners.min() - 1e-12 <= value <= corners.max() + 1e-12


class TestImageGradient:
    def test_constant_image(self):
        img = IntensityImage(np.full((8, 8), 0.4))
        assert image_gradient(img, 3.2, 4.1) == (0.0, 0.0)

    def test_horizontal_ramp(self):
        w = 16
        ramp = np.tile(np.arange(w) / w, (8, 1))
        img = IntensityImage(ramp)
        gx, gy = image_gradient(img, 7.3, 3.6)
        assert gx == pytest.approx(1.0 / w, abs=1e-9)
        assert gy == pytest.approx(0.0, abs=1e-9)

    def test_matches_unit_step_differences_of_bilinear(self, rng):
        img = IntensityImage(rng.uniform(0, 1, (12, 12)))
        for _ in range(100):
            u = rng.uniform(1.0, 10.0)
            v = rng.uniform(1.0, 10.0)
            gx, gy = image_gradient(img, u, v)
            gx_ref = 0.5 * (bilinear_sample(img, u + 1, v) - bilinear_sample(img, u - 1, v))
            gy_ref = 0.5 * (bilinear_sample(img, u, v + 1) - bilinear_sample(img, u, v - 1))
            assert gx == pytest.approx(gx_ref, abs=1e-6)
            assert gy == pytest.approx(gy_ref, abs=1e-6)

    def test_border_raises(self):
        img = IntensityImage(np.zeros((8, 8)))
        with pytest.raises(OutOfBoundsError):
            image_gradient(img, 0.5, 4.0)


class TestPyramid:
    def test_single_level_is_input(self):
        img = checker()
        pyr = build_pyramid(img, 1)
        assert len(pyr) == 1
        np.testing.assert_array_equal(pyr[0].pixels, img.pixels)

    def test_constant_image_stays_constant(self):
        img = IntensityImage(np.full((4, 4), 0.7))
        pyr = build_pyramid(img, 3)
        assert [lvl.pixels.shape for lvl in pyr.levels] == [(4, 4), (2, 2), (1, 1)]
        for lvl in pyr.levels:
            np.testing.assert_allclose(lvl.pixels, 0.7)

    def test_matches_block_average_oracle(self, rng):
        arr = rng.uniform(0, 1, (8, 8))
        pyr = build_pyramid(IntensityImage(arr), 3)
        ref1 = box_downsample_loops(arr)
        np.testing.assert_allclose(pyr[1].pixels, ref1, atol=1e-12)
        np.testing.assert_allclose(pyr[2].pixels, box_downsample_loops(ref1), atol=1e-12)

    def test_floor_halving_with_odd_sizes(self, rng):
        pyr = build_pyramid(IntensityImage(rng.uniform(0, 1, (9, 13))), 3)
        assert [lvl.pixels.shape for lvl in pyr.levels] == [(9, 13), (4, 6), (2, 3)]

    def test_too_many_levels_rejected(self):
        with pytest.raises(InvalidArgumentError):
            build_pyramid(IntensityImage(np.zeros((4, 4))), 4)
        with pytest.raises(InvalidArgumentError):
            build_pyramid(IntensityImage(np.zeros((64, 64))), 7)


def test_gradient_magnitude_map_zero_border(rng):
    g = gradient_magnitude_map(IntensityImage(rng.uniform(0, 1, (10, 10))))
    assert g[0].max() == 0.0 and g[-1].max() == 0.0
    assert g[:, 0].max() == 0.0 and g[:, -1].max() == 0.0
