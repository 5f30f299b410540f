"""Codecs, corruption generators, masks and metrics."""

import math

import numpy as np
import pytest

from convgp import signalio as sio
from convgp.rng import make_rng


class TestImageBuffer:
    def test_grayscale_promotes_channel_axis(self):
        img = sio.ImageBuffer(np.zeros((4, 5)))
        assert img.channels == 1 and img.pixels.shape == (4, 5, 1)

    def test_bad_channel_count(self):
        with pytest.raises(ValueError):
            sio.ImageBuffer(np.zeros((4, 5, 2)))

    def test_tensor_round_trip(self):
        px = make_rng(0).random((3, 4, 3))
        img = sio.ImageBuffer(px)
        back = sio.ImageBuffer.from_tensor(img.to_tensor())
        np.testing.assert_array_equal(back.pixels, px)


class TestCodec:
    def test_p2_scaling_golden(self, tmp_path):
        path = tmp_path / "t.pgm"
        path.write_text("P2\n2 2\n255\n0 255 128 64\n")
        img = sio.read_image(path)
        np.testing.assert_allclose(
            img.pixels[:, :, 0],
            np.array([[0.0, 1.0], [128 / 255, 64 / 255]]),
        )

    def test_p2_comments_ignored(self, tmp_path):
        path = tmp_path / "t.pgm"
        path.write_text("P2\n# a comment\n2 1\n# another\n255\n7 9\n")
        img = sio.read_image(path)
        assert img.width == 2 and img.height == 1

    @pytest.mark.parametrize("binary", [True, False])
    @pytest.mark.parametrize("channels", [1, 3])
    def test_round_trip_8bit(self, tmp_path, binary, channels):
        px = make_rng(1).random((5, 7, channels))
        img = sio.ImageBuffer(px)
        ext = "ppm" if channels == 3 else "pgm"
        path = tmp_path / f"t.{ext}"
        sio.write_image(path, img, binary=binary)
        back = sio.read_image(path)
        assert back.channels == channels
        assert np.max(np.abs(back.pixels - px)) <= 1.0 / (2 * 255)

    def test_round_trip_16bit(self, tmp_path):
        px = make_rng(2).random((4, 4, 1))
        path = tmp_path / "t.pgm"
        sio.write_image(path, sio.ImageBuffer(px), maxval=65535)
        back = sio.read_image(path)
        assert np.max(np.abs(back.pixels - px)) <= 1.0 / (2 * 65535)

    def test_p6_16bit_big_endian_golden(self, tmp_path):
        # one pixel, value 0x0102 in all three channels
        raw = b"P6\n1 1\n65535\n" + bytes([1, 2]) * 3
        path = tmp_path / "t.ppm"
        path.write_bytes(raw)
        img = sio.read_image(path)
        expect = (1 * 256 + 2) / 65535
        np.testing.assert_allclose(img.pixels[0, 0], expect)

    def test_write_clamps_out_of_range(self, tmp_path):
        img = sio.ImageBuffer(np.array([[[-0.5]], [[1.5]]]))
        path = tmp_path / "t.pgm"
        sio.write_image(path, img)
        back = sio.read_image(path)
        assert back.pixels[0, 0, 0] == 0.0
        assert back.pixels[1, 0, 0] == 1.0

    def test_truncated_payload(self, tmp_path):
        path = tmp_path / "t.pgm"
        path.write_bytes(b"P5\n4 4\n255\n" + b"\x00" * 10)
        with pytest.raises(ValueError, match="truncated"):
            sio.read_image(path)

    def test_unsupported_maxval(self, tmp_path):
        path = tmp_path / "t.pgm"
        path.write_text("P2\n1 1\n100\n5\n")
        with pytest.raises(ValueError, match="maxval"):
            sio.read_image(path)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "t.pgm"
        path.write_bytes(b"P7\n1 1\n255\n\x00")
        with pytest.raises(ValueError, match="magic"):
            sio.read_image(path)


class TestAddNoise:
    def test_sigma_zero_identity(self):
        img = sio.ImageBuffer(make_rng(3).random((4, 4, 1)))
        out = sio.add_noise(img, 0.0, make_rng(0))
        np.testing.assert_array_equal(out.pixels, img.pixels)

    def test_empirical_mse_matches_sigma(self):
        img = sio.ImageBuffer(np.full((64, 64, 3), 0.5))
        sigma = 25 / 255
        out = sio.add_noise(img, sigma, make_rng(4))
        m = sio.mse(out.pixels, img.pixels)
        assert abs(m / sigma**2 - 1.0) < 0.03

    def test_seeded_determinism(self):
        img = sio.ImageBuffer(np.zeros((3, 3, 1)))
        a = sio.add_noise(img, 0.2, make_rng(5, 1))
        b = sio.add_noise(img, 0.2, make_rng(5, 1))
        np.testing.assert_array_equal(a.pixels, b.pixels)


class TestRandomMask:
    def test_fraction_zero_all_observed(self):
        m = sio.random_mask((8, 8), 0.0, make_rng(0))
        assert m.fraction_observed == 1.0

    def test_exact_drop_count(self):
        m = sio.random_mask((64, 64), 0.5, make_rng(1))
        assert int((~m.observed).sum()) == 2048

    def test_floor_of_fraction(self):
        m = sio.random_mask((3, 3), 0.5, make_rng(2))
        assert int((~m.observed).sum()) == 4  # floor(4.5)

    def test_two_seeds_differ(self):
        a = sio.random_mask((64, 64), 0.5, make_rng(3)).observed
        b = sio.random_mask((64, 64), 0.5, make_rng(4)).observed
        dropped_a, dropped_b = ~a, ~b
        inter = np.logical_and(dropped_a, dropped_b).sum()
        union = np.logical_or(dropped_a, dropped_b).sum()
        assert inter / union < 0.6


class TestMetrics:
    def test_mse_to_psnr_golden(self):
        a = np.zeros((10, 10))
        b = np.full((10, 10), 0.1)
        assert abs(sio.psnr(a, b) - 20.0) < 1e-10

    def test_psnr_zero_db(self):
        a = np.zeros(4)
        b = np.ones(4)
        assert sio.psnr(a, b) == 0.0

    def test_identical_images_inf(self):
        a = make_rng(6).random((3, 3))
        assert sio.psnr(a, a) == math.inf

    def test_masked_equals_unmasked_with_full_mask(self):
        rng = make_rng(7)
        a, b = rng.random((5, 5)), rng.random((5, 5))
        full = np.ones((5, 5), dtype=bool)
        assert sio.mse(a, b, full) == sio.mse(a, b)

    def test_mask_restricts(self):
        a = np.zeros(4)
        b = np.array([1.0, 0.0, 0.0, 0.0])
        m = np.array([False, True, True, True])
        assert sio.mse(a, b, m) == 0.0

    def test_empty_mask_rejected(self):
        with pytest.raises(ValueError, match="mask"):
            sio.mse(np.zeros(3), np.zeros(3), np.zeros(3, dtype=bool))

    def test_round_trip_duality(self):
        m = 0.0123
        assert abs(10 ** (-sio.psnr(np.zeros(1), np.sqrt(m) * np.ones(1)) / 10) - m) < 1e-10


class TestCsvSignal:
    def test_round_trip_bit_exact(self, tmp_path):
        rng = make_rng(8)
        pos = np.arange(20.0)
        val = rng.standard_normal(20) * 1e-7
        obs = rng.random(20) > 0.3
        path = tmp_path / "s.csv"
        sio.write_signal(path, pos, val, obs)
        p2, v2, o2 = sio.read_signal(path)
        np.testing.assert_array_equal(p2, pos)
        np.testing.assert_array_equal(v2, val)
        np.testing.assert_array_equal(o2, obs)

    def test_missing_observed_column_defaults_true(self, tmp_path):
        path = tmp_path / "s.csv"
        path.write_text("position,value\n0,1.5\n1,2.5\n")
        _, _, obs = sio.read_signal(path)
        assert obs.all()

    def test_non_numeric_cell_reports_row(self, tmp_path):
        path = tmp_path / "s.csv"
        path.write_text("position,value\n0,1.5\n1,abc\n")
        with pytest.raises(ValueError, match=":3"):
            sio.read_signal(path)

    def test_ragged_row_rejected(self, tmp_path):
        path = tmp_path / "s.csv"
        path.write_text("position,value\n0,1.5\n1,2.5,1\n")
        with pytest.raises(ValueError, match="ragged"):
            sio.read_signal(path)
