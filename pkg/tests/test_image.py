"""Retinal image container, file I/O, and fixation-anchored resampling."""

import numpy as np
import pytest

from pyrafove import RetinalImage, load_image, save_pgm, scale_image, translate_image
from pyrafove.errors import ParameterError


def checker(h=32, w=32, seed=0):
    rng = np.random.default_rng(seed)
    return rng.uniform(0.0, 1.0, (h, w))


class TestRetinalImage:
    def test_accepts_valid_grayscale(self):
        im = RetinalImage(checker(), pixels_per_degree=3600.0)
        assert im.shape == (32, 32)
        assert im.pixels.dtype == np.float64

    def test_rejects_non_2d(self):
        with pytest.raises(ParameterError):
            RetinalImage(np.zeros((4, 4, 3)), pixels_per_degree=60.0)

    def test_rejects_empty(self):
        with pytest.raises(ParameterError):
            RetinalImage(np.zeros((0, 5)), pixels_per_degree=60.0)

    def test_rejects_nan(self):
        px = checker()
        px[3, 3] = np.nan
        with pytest.raises(ParameterError):
            RetinalImage(px, pixels_per_degree=60.0)

    def test_rejects_out_of_range_values(self):
        with pytest.raises(ParameterError):
            RetinalImage(np.full((4, 4), 1.5), pixels_per_degree=60.0)

    def test_rejects_bad_resolution(self):
        with pytest.raises(ParameterError):
            RetinalImage(checker(), pixels_per_degree=0.0)

    def test_fixation_px_center_by_default(self):
        im = RetinalImage(checker(11, 21), pixels_per_degree=3600.0)
        assert im.fixation_px == (10.0, 5.0)

    def test_fixation_px_offset(self):
        # 3600 px/deg = 1 px per arcsec, so offsets map 1:1
        im = RetinalImage(checker(101, 101), pixels_per_degree=3600.0,
                          fixation=(10.0, -5.0))
        col, row = im.fixation_px
        assert col == pytest.approx(60.0)
        assert row == pytest.approx(45.0)

    def test_fixation_outside_bounds_rejected(self):
        with pytest.raises(ParameterError):
            RetinalImage(checker(11, 11), pixels_per_degree=3600.0,
                         fixation=(300.0, 0.0))

    def test_arcsec_per_pixel(self):
        im = RetinalImage(checker(), pixels_per_degree=180.0)
        assert im.arcsec_per_pixel == pytest.approx(20.0)


class TestFileIO:
    def test_pgm_roundtrip_8bit(self, tmp_path):
        values = np.arange(256, dtype=np.float64).reshape(16, 16) / 255.0
        im = RetinalImage(values, pixels_per_degree=60.0)
        path = tmp_path / "ramp.pgm"
        save_pgm(im, path)
        back = load_image(path, pixels_per_degree=60.0)
        np.testing.assert_allclose(back.pixels, values, atol=1e-12)

    def test_pgm_16bit(self, tmp_path):
        data = np.array([[0, 1000], [30000, 65535]], dtype=np.uint16)
        path = tmp_path / "deep.pgm"
        with open(path, "wb") as fh:
            fh.write(b"P5\n2 2\n65535\n")
            fh.write(data.astype(">u2").tobytes())  # PGM payload is big-endian
        back = load_image(path, pixels_per_degree=60.0)
        np.testing.assert_allclose(back.pixels, data / 65535.0, atol=1e-9)

    def test_png_8bit(self, tmp_path):
        from PIL import Image

        data = (checker(8, 8) * 255).astype(np.uint8)
        path = tmp_path / "gray.png"
        Image.fromarray(data, mode="L").save(path)
        back = load_image(path, pixels_per_degree=60.0)
        np.testing.assert_allclose(back.pixels, data / 255.0, atol=1e-12)

    def test_load_applies_fixation(self, tmp_path):
        im = RetinalImage(checker(64, 64), pixels_per_degree=3600.0)
        path = tmp_path / "fix.pgm"
        save_pgm(im, path)
        back = load_image(path, pixels_per_degree=3600.0, fixation=(5.0, 2.0))
        assert back.fixation == (5.0, 2.0)


class TestScaleImage:
    def test_identity_factor(self):
        im = RetinalImage(checker(33, 33), pixels_per_degree=60.0)
        out = scale_image(im, 1.0)
        np.testing.assert_allclose(out.pixels, im.pixels, atol=1e-9)

    def test_magnification_doubles_disk_radius(self):
        h = w = 101
        rows, cols = np.mgrid[0:h, 0:w]
        disk = ((rows - 50) ** 2 + (cols - 50) ** 2 <= 10**2).astype(np.float64)
        im = RetinalImage(disk, pixels_per_degree=60.0)
        out = scale_image(im, 2.0)
        # area scales by factor^2; bicubic ringing stays near the rim
        area = float((out.pixels > 0.5).sum())
        assert area == pytest.approx(np.pi * 20**2, rel=0.05)

    def test_content_scales_about_fixation(self):
        px = np.zeros((101, 101))
        # fixation at image center; bright dot 10 px to its right
        px[50, 60] = 1.0
        im = RetinalImage(px, pixels_per_degree=3600.0)
        out = scale_image(im, 2.0)
        r, c = np.unravel_index(np.argmax(out.pixels), out.pixels.shape)
        assert (r, c) == (50, 70)

    def test_offset_fixation_is_the_anchor(self):
        px = np.zeros((101, 101))
        px[50, 30] = 1.0  # at the fixation point itself
        im = RetinalImage(px, pixels_per_degree=3600.0, fixation=(-20.0, 0.0))
        out = scale_image(im, 3.0)
        r, c = np.unravel_index(np.argmax(out.pixels), out.pixels.shape)
        assert (r, c) == (50, 30)

    def test_geometry_unchanged(self):
        im = RetinalImage(checker(), pixels_per_degree=42.0, fixation=(3.0, 4.0))
        out = scale_image(im, 1.7)
        assert out.shape == im.shape
        assert out.pixels_per_degree == im.pixels_per_degree
        assert out.fixation == im.fixation

    def test_rejects_nonpositive_factor(self):
        im = RetinalImage(checker(), pixels_per_degree=60.0)
        with pytest.raises(ParameterError):
            scale_image(im, 0.0)
        with pytest.raises(ParameterError):
            scale_image(im, -2.0)


class TestTranslateImage:
    def test_integer_shift_is_exact(self):
        im = RetinalImage(checker(32, 32), pixels_per_degree=3600.0)
        out = translate_image(im, 3.0, -2.0)  # 1 px per arcsec
        # out(r, c) = in(r + 2, c - 3) where both sides exist
        np.testing.assert_allclose(
            out.pixels[:30, 3:], im.pixels[2:, :29], atol=1e-12
        )

    def test_shift_direction(self):
        px = np.zeros((21, 21))
        px[10, 10] = 1.0
        im = RetinalImage(px, pixels_per_degree=3600.0)
        out = translate_image(im, 4.0, 3.0)
        r, c = np.unravel_index(np.argmax(out.pixels), out.pixels.shape)
        assert (r, c) == (13, 14)

    def test_constant_image_unchanged(self):
        im = RetinalImage(np.full((16, 16), 0.6), pixels_per_degree=60.0)
        out = translate_image(im, 123.4, -56.7)
        np.testing.assert_allclose(out.pixels, 0.6, atol=1e-12)
