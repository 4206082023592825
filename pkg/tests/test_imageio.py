"""Image decoding, encoding, and unit-tensor conversion."""

import numpy as np
import pytest
from PIL import Image

from simi.errors import CorruptData, ShapeMismatch, UnsupportedFormat
from simi.imageio import (RawImage, from_unit_tensor, load_image, save_image,
                          to_unit_tensor)


def _random_image(rng, h=13, w=17):
    return RawImage(rng.integers(0, 256, (h, w, 3), dtype=np.uint8))


class TestRawImage:
    def test_properties(self):
        img = RawImage(np.zeros((4, 6, 3), dtype=np.uint8))
        assert (img.height, img.width, img.channels) == (4, 6, 3)

    def test_rejects_bad_shape(self):
        with pytest.raises(ShapeMismatch):
            RawImage(np.zeros((4, 6), dtype=np.uint8))
        with pytest.raises(ShapeMismatch):
            RawImage(np.zeros((4, 6, 4), dtype=np.uint8))


class TestPngRoundTrip:
    def test_rgb_round_trip(self, tmp_path):
        rng = np.random.default_rng(0)
        img = _random_image(rng)
        path = tmp_path / "x.png"
        save_image(path, img)
        back = load_image(path)
        assert np.array_equal(back.data, img.data)

    def test_rgba_alpha_dropped(self, tmp_path):
        rng = np.random.default_rng(1)
        rgba = rng.integers(0, 256, (5, 7, 4), dtype=np.uint8)
        path = tmp_path / "a.png"
        Image.fromarray(rgba, mode="RGBA").save(path)
        back = load_image(path)
        assert np.array_equal(back.data, rgba[:, :, :3])

    def test_grayscale_replicated(self, tmp_path):
        gray = np.arange(0, 250, 10, dtype=np.uint8).reshape(5, 5)
        path = tmp_path / "g.png"
        Image.fromarray(gray, mode="L").save(path)
        back = load_image(path)
        for c in range(3):
            assert np.array_equal(back.data[:, :, c], gray)

    def test_palette_png(self, tmp_path):
        rng = np.random.default_rng(2)
        img = Image.fromarray(rng.integers(0, 256, (6, 6, 3), dtype=np.uint8), "RGB")
        pal = img.convert("P", palette=Image.Palette.ADAPTIVE)
        path = tmp_path / "p.png"
        pal.save(path)
        back = load_image(path)
        assert np.array_equal(back.data, np.asarray(pal.convert("RGB")))


class TestPpm:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(3)
        img = _random_image(rng, 9, 4)
        path = tmp_path / "x.ppm"
        save_image(path, img)
        back = load_image(path)
        assert np.array_equal(back.data, img.data)

    def test_comments_and_whitespace(self, tmp_path):
        raw = b"P6\n# a comment\n2 1\n# another\n255\n" + bytes([1, 2, 3, 4, 5, 6])
        path = tmp_path / "c.ppm"
        path.write_bytes(raw)
        img = load_image(path)
        assert img.data.shape == (1, 2, 3)
        assert img.data.ravel().tolist() == [1, 2, 3, 4, 5, 6]

    def test_truncated_pixels(self, tmp_path):
        path = tmp_path / "t.ppm"
        path.write_bytes(b"P6\n2 2\n255\n" + bytes(5))
        with pytest.raises(CorruptData):
            load_image(path)

    def test_wrong_magic(self, tmp_path):
        path = tmp_path / "m.ppm"
        path.write_bytes(b"P5\n2 2\n255\n" + bytes(4))
        with pytest.raises(UnsupportedFormat):
            load_image(path)

    def test_wrong_maxval(self, tmp_path):
        path = tmp_path / "v.ppm"
        path.write_bytes(b"P6\n1 1\n65535\n" + bytes(6))
        with pytest.raises(UnsupportedFormat):
            load_image(path)


class TestFormatErrors:
    def test_unknown_extension(self, tmp_path):
        img = RawImage(np.zeros((2, 2, 3), dtype=np.uint8))
        with pytest.raises(UnsupportedFormat):
            save_image(tmp_path / "x.bmp", img)

    def test_garbage_png(self, tmp_path):
        path = tmp_path / "bad.png"
        path.write_bytes(b"definitely not a png")
        with pytest.raises(UnsupportedFormat):
            load_image(path)


class TestUnitTensor:
    def test_shape_and_range(self):
        rng = np.random.default_rng(4)
        img = _random_image(rng)
        t = to_unit_tensor(img)
        assert t.shape == (1, 3, img.height, img.width)
        assert t.dtype == np.float32
        assert t.min() >= 0.0 and t.max() <= 1.0

    def test_exact_round_trip_all_intensities(self):
        # every 8-bit value must survive /255 then round-half-up
        ramp = np.tile(np.arange(256, dtype=np.uint8)[:, None, None], (1, 2, 3))
        img = RawImage(ramp)
        back = from_unit_tensor(to_unit_tensor(img))
        assert np.array_equal(back.data, img.data)

    def test_round_half_up(self):
        t = np.zeros((1, 3, 1, 2), dtype=np.float64)
        t[0, :, 0, 0] = 0.5  # 127.5 rounds up
        t[0, :, 0, 1] = 1.0
        out = from_unit_tensor(t)
        assert out.data[0, 0, 0] == 128
        assert out.data[0, 1, 0] == 255

    def test_clamps_out_of_range(self):
        t = np.array([[-0.2, 1.7]]).reshape(1, 1, 1, 2)
        t = np.repeat(t, 3, axis=1)
        out = from_unit_tensor(t)
        assert out.data[0, 0, 0] == 0
        assert out.data[0, 1, 0] == 255

    def test_rejects_wrong_shape(self):
        with pytest.raises(ShapeMismatch):
            from_unit_tensor(np.zeros((2, 3, 4, 4)))
