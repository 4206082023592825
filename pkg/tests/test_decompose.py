"""Bit-plane, log-threshold, and quantization-threshold decompositions.

Expected values come from independent integer-arithmetic oracles
evaluated in plain Python, never from the implementation under test.
"""

import numpy as np
import pytest

from simi.decompose import (DEFAULT_QUANT_LEVELS, LOG_THRESHOLDS,
                            PLANES_PER_CHANNEL, DecompositionMode,
                            bitplane_decompose, bitplane_reconstruct,
                            decompose_tensor, log_threshold_decompose,
                            quant_threshold_decompose)
from simi.errors import (ChannelCountMismatch, InvalidLevelCount,
                         NonBinaryValue)
from simi.imageio import RawImage


def _gradient_image():
    """16x16x3 image whose channels jointly cover all 256 intensities."""
    vals = np.arange(256, dtype=np.uint8).reshape(16, 16)
    data = np.stack([vals, vals[::-1], vals.T], axis=2)
    return RawImage(data)


class TestBitplane:
    def test_shape_and_binary(self):
        planes = bitplane_decompose(_gradient_image())
        assert planes.shape == (1, 24, 16, 16)
        assert set(np.unique(planes)) <= {0.0, 1.0}

    def test_plane_order_channel_major(self):
        # plane c*8+k must hold bit k of channel c
        img = _gradient_image()
        planes = bitplane_decompose(img)
        chans = img.data.transpose(2, 0, 1)
        for c in range(3):
            for k in range(PLANES_PER_CHANNEL):
                expected = (chans[c].astype(int) >> k) & 1
                assert np.array_equal(planes[0, c * 8 + k], expected), (c, k)

    def test_round_trip_exact_all_intensities(self):
        img = _gradient_image()
        back = bitplane_reconstruct(bitplane_decompose(img))
        assert back.dtype == np.uint8
        assert np.array_equal(back[0], img.data.transpose(2, 0, 1))

    def test_reconstruct_rejects_non_binary(self):
        planes = bitplane_decompose(_gradient_image())
        planes[0, 3, 0, 0] = 0.5
        with pytest.raises(NonBinaryValue):
            bitplane_reconstruct(planes)

    def test_msb_plane_is_threshold_at_128(self):
        img = _gradient_image()
        planes = bitplane_decompose(img)
        expected = (img.data[:, :, 0].astype(int) >= 128).astype(float)
        assert np.array_equal(planes[0, 7], expected)


class TestLogThreshold:
    def test_thresholds_are_powers_of_two(self):
        assert LOG_THRESHOLDS == (1, 2, 4, 8, 16, 32, 64, 128)

    def test_indicator_oracle(self):
        img = _gradient_image()
        planes = log_threshold_decompose(img)
        assert planes.shape == (1, 24, 16, 16)
        chans = img.data.transpose(2, 0, 1).astype(int)
        for c in range(3):
            for j, t in enumerate(LOG_THRESHOLDS):
                expected = (chans[c] >= t).astype(float)
                assert np.array_equal(planes[0, c * 8 + j], expected), (c, t)

    def test_monotone_in_threshold(self):
        planes = log_threshold_decompose(_gradient_image())[0]
        for c in range(3):
            for j in range(7):
                assert np.all(planes[c * 8 + j] >= planes[c * 8 + j + 1])


class TestQuantThreshold:
    def test_exhaustive_integer_oracle(self):
        # all 256 intensities for every default level count
        ramp = np.tile(np.arange(256, dtype=np.uint8)[:, None, None], (1, 1, 3))
        img = RawImage(ramp.reshape(16, 16, 3))
        planes = quant_threshold_decompose(img)
        flat = img.data.transpose(2, 0, 1).reshape(3, -1)
        for j, t in enumerate(DEFAULT_QUANT_LEVELS):
            for c in range(3):
                got = planes[0, c * 8 + j].ravel()
                for px, intensity in enumerate(flat[c]):
                    k = (int(intensity) * (t - 1)) // 255
                    assert got[px] == k / (t - 1), (t, intensity)

    def test_two_levels_is_msb_threshold(self):
        img = _gradient_image()
        planes = quant_threshold_decompose(img, levels=(2,) * 8)
        expected = (img.data[:, :, 0].astype(int) * 1) // 255  # 1 only at 255
        assert np.array_equal(planes[0, 0], expected.astype(float))

    def test_unit_range_endpoints(self):
        img = _gradient_image()
        planes = quant_threshold_decompose(img)
        assert planes.min() == 0.0
        assert planes.max() == 1.0  # intensity 255 maps to (t-1)/(t-1)

    def test_rejects_bad_level_counts(self):
        img = _gradient_image()
        with pytest.raises(InvalidLevelCount):
            quant_threshold_decompose(img, levels=(1,) * 8)
        with pytest.raises(InvalidLevelCount):
            quant_threshold_decompose(img, levels=(2, 3))


class TestDecompositionMode:
    def test_defaults(self):
        mode = DecompositionMode()
        assert mode.variant == "bitplane"
        assert mode.quant_levels == DEFAULT_QUANT_LEVELS

    def test_rejects_unknown_variant(self):
        with pytest.raises(ValueError):
            DecompositionMode(variant="wavelet")

    def test_rejects_bad_levels(self):
        with pytest.raises(InvalidLevelCount):
            DecompositionMode(variant="quant", quant_levels=(0,) * 8)


class TestDecomposeTensor:
    def test_matches_image_path_bitplane(self):
        img = _gradient_image()
        from simi.imageio import to_unit_tensor

        t = to_unit_tensor(img)
        via_tensor = decompose_tensor(t, DecompositionMode())
        via_image = bitplane_decompose(img)
        assert np.array_equal(via_tensor, via_image)
        assert via_tensor.dtype == np.float32

    def test_matches_image_path_quant(self):
        img = _gradient_image()
        from simi.imageio import to_unit_tensor

        t = to_unit_tensor(img)
        mode = DecompositionMode(variant="quant")
        assert np.array_equal(decompose_tensor(t, mode),
                              quant_threshold_decompose(img))

    def test_batch_axis(self):
        rng = np.random.default_rng(0)
        x = rng.random((3, 3, 5, 5), dtype=np.float32)
        planes = decompose_tensor(x, DecompositionMode(variant="log"))
        assert planes.shape == (3, 24, 5, 5)
        one = decompose_tensor(x[1:2], DecompositionMode(variant="log"))
        assert np.array_equal(planes[1:2], one)

    def test_rejects_wrong_channels(self):
        with pytest.raises(ChannelCountMismatch):
            decompose_tensor(np.zeros((1, 4, 3, 3)), DecompositionMode())
