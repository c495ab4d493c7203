import numpy as np
import pytest

from . import (
    foreground_mask,
    salient_contour_interior,
    read_mask,
    write_mask,
    gaussian_pyramid,
    laplacian_pyramid,
    collapse,
    laplacian_blend,
    replace_background,
)
from ..datapipe import synth_face
from ..errors import ConfigError, ShapeError


def disc(center, radius, size=64):
    yy, xx = np.mgrid[:size, :size]
    return (((yy - center[0]) ** 2 + (xx - center[1]) ** 2) <= radius**2).astype(np.float32)


@pytest.fixture
def images():
    rng = np.random.default_rng(0)
    return rng.random((2, 64, 48, 3))


class TestForegroundMask:
    def test_union_with_empty(self):
        seg = disc((32, 32), 10)
        np.testing.assert_array_equal(foreground_mask(seg, np.zeros_like(seg), 0), seg)

    def test_union_of_discs(self):
        a, b = disc((30, 25), 10), disc((30, 38), 10)
        brute = sum(1 for y in range(64) for x in range(64) if a[y, x] or b[y, x])
        mask = foreground_mask(a, b)
        assert int((mask == 1.0).sum()) == brute

    def test_all_ones(self):
        ones = np.ones((16, 16), np.float32)
        np.testing.assert_array_equal(foreground_mask(ones, np.zeros_like(ones)), ones)

    def test_feathered_edge(self):
        mask = foreground_mask(disc((32, 32), 10), np.zeros((64, 64)), feather_sigma=2.0)
        assert 0.0 < mask[32, 32 + 12] < 1.0
        assert mask[0, 0] == pytest.approx(0.0, abs=1e-6)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            foreground_mask(np.zeros((4, 4)), np.zeros((4, 5)))


class TestPyramid:
    @pytest.mark.parametrize("levels", [1, 2, 4, 5])
    def test_round_trip(self, images, levels):
        image = images[0]
        np.testing.assert_allclose(collapse(laplacian_pyramid(image, levels)), image, atol=1e-6)

    def test_odd_sizes(self):
        image = np.random.default_rng(1).random((37, 23))
        np.testing.assert_allclose(collapse(laplacian_pyramid(image, 4)), image, atol=1e-6)

    def test_gaussian_levels_halve(self, images):
        shapes = [level.shape[:2] for level in gaussian_pyramid(images[0], 3)]
        assert shapes == [(64, 48), (32, 24), (16, 12)]


class TestBlend:
    def test_full_mask_keeps_foreground(self, images):
        out = laplacian_blend(images[0], images[1], np.ones((64, 48)))
        np.testing.assert_allclose(out, images[0], atol=1e-6)

    def test_empty_mask_keeps_background(self, images):
        out = laplacian_blend(images[0], images[1], np.zeros((64, 48)))
        np.testing.assert_allclose(out, images[1], atol=1e-6)

    def test_same_images_ignore_mask(self, images):
        mask = disc((20, 20), 12)[:, :48]
        out = laplacian_blend(images[0], images[0], mask, levels=3)
        expected = np.clip(collapse(laplacian_pyramid(images[0], 3)), 0, 1).astype(np.float32)
        np.testing.assert_array_equal(out, expected)

    def test_monotone_in_mask(self, images):
        fg, bg = images
        low = np.full((64, 48), 0.3)
        high = low.copy()
        high[10:20, 10:20] = 0.8
        a = laplacian_blend(fg, bg, low, levels=1)
        b = laplacian_blend(fg, bg, high, levels=1)
        assert np.all(np.abs(b - fg) <= np.abs(a - fg) + 1e-6)

    def test_output_range(self, images):
        out = laplacian_blend(images[0] * 2 - 0.5, images[1], disc((32, 24), 15)[:, :48])
        assert out.min() >= 0.0 and out.max() <= 1.0

    @pytest.mark.parametrize("levels", [0, 7])
    def test_bad_levels(self, images, levels):
        with pytest.raises(ConfigError):
            laplacian_blend(images[0], images[1], np.ones((64, 48)), levels=levels)

    def test_shape_mismatch(self, images):
        with pytest.raises(ShapeError):
            laplacian_blend(images[0], images[1][:32], np.ones((64, 48)))
        with pytest.raises(ShapeError):
            laplacian_blend(images[0], images[1], np.ones((32, 48)))


def test_salient_contour_of_synthetic_face():
    image, _ = synth_face(0)
    interior = salient_contour_interior(image)
    assert interior.shape == (128, 128)
    assert set(np.unique(interior)) <= {0.0, 1.0}
    assert interior.sum() > 0


def test_flat_image_has_no_salient_contour():
    assert salient_contour_interior(np.full((32, 32, 3), 0.5, np.float32)).sum() == 0


def test_replace_background_resizes_and_keeps_person():
    image, _ = synth_face(0)
    background = np.zeros((64, 64, 3), np.float32)
    person = np.zeros((128, 128), np.float32)
    person[32:96, 32:96] = 1.0
    out = replace_background(image, background, person, levels=3, feather_sigma=0)
    assert out.shape == image.shape
    np.testing.assert_allclose(out[60:68, 60:68], image[60:68, 60:68], atol=1e-2)
    np.testing.assert_allclose(out[:4, :4], 0.0, atol=1e-2)


def test_mask_png_round_trip(tmp_path):
    mask = disc((32, 32), 12)
    write_mask(tmp_path / "m.png", mask)
    np.testing.assert_array_equal(read_mask(tmp_path / "m.png"), mask)
