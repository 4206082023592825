"""Self-information decompositions of 8-bit RGB images.

Three interchangeable strategies, all emitting a (N, 24, H, W) stack so the
downstream network is agnostic to the choice:

* bit-plane: 8 binary maps per channel, map k holding bit k (LSB first);
* log-threshold: binary maps I >= t for t in {1, 2, 4, ..., 128};
* quant-threshold: uniform requantization of intensities to t_j levels,
  one map per level count, values in [0, 1] (not binary).

Plane ordering is channel-major: output channel c*8+k is map k of color
channel c. Checkpoints depend on this order staying fixed.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ChannelCountMismatch, InvalidLevelCount, NonBinaryValue
from .imageio import RawImage

PLANES_PER_CHANNEL = 8
LOG_THRESHOLDS = tuple(2 ** i for i in range(8))

# Spans coarse to fine like bit planes while keeping the stack at 8 maps
# per color channel.
DEFAULT_QUANT_LEVELS = (2, 3, 4, 5, 9, 17, 33, 65)


@dataclass(frozen=True)
class DecompositionMode:
    """Which decomposition feeds the network: bitplane | log | quant."""

    variant: str = "bitplane"
    quant_levels: tuple = field(default=DEFAULT_QUANT_LEVELS)

    def __post_init__(self):
        if self.variant not in ("bitplane", "log", "quant"):
            raise ValueError(f"unknown decomposition variant {self.variant!r}")
        object.__setattr__(self, "quant_levels", tuple(int(t) for t in self.quant_levels))
        if self.variant == "quant":
            if len(self.quant_levels) != PLANES_PER_CHANNEL:
                raise InvalidLevelCount(
                    f"need exactly {PLANES_PER_CHANNEL} level counts, got {len(self.quant_levels)}"
                )
            for t in self.quant_levels:
                if t < 2:
                    raise InvalidLevelCount(f"level count must be >= 2, got {t}")


def _intensities(img):
    """(3, H, W) uint8 channels from a RawImage, validating channel count."""
    if img.channels != 3:
        raise ChannelCountMismatch(f"expected 3 channels, got {img.channels}")
    return img.data.transpose(2, 0, 1)


def bitplane_decompose(img, dtype=np.float32):
    """Split each 8-bit channel into 8 binary planes, shape (1, 24, H, W)."""
    chans = _intensities(img)
    return _bitplane_from_intensities(chans[None], dtype)


def _bitplane_from_intensities(chans, dtype):
    # chans: (N, 3, H, W) uint8
    n, _, h, w = chans.shape
    planes = np.empty((n, 3 * PLANES_PER_CHANNEL, h, w), dtype=dtype)
    for c in range(3):
        for k in range(PLANES_PER_CHANNEL):
            planes[:, c * PLANES_PER_CHANNEL + k] = (chans[:, c] >> k) & 1
    return planes


def bitplane_reconstruct(stack):
    """Exact inverse of :func:`bitplane_decompose`."""
    stack = np.asarray(stack)
    if stack.ndim != 4 or stack.shape[0] != 1 or stack.shape[1] != 3 * PLANES_PER_CHANNEL:
        raise ChannelCountMismatch(f"expected a (1, 24, H, W) stack, got {stack.shape}")
    if not np.all((stack == 0.0) | (stack == 1.0)):
        raise NonBinaryValue("bit-plane stack contains values outside {0.0, 1.0}")
    weights = np.array([2.0 ** k for k in range(PLANES_PER_CHANNEL)])
    _, _, h, w = stack.shape
    chans = np.zeros((3, h, w))
    for c in range(3):
        for k in range(PLANES_PER_CHANNEL):
            chans[c] += stack[0, c * PLANES_PER_CHANNEL + k] * weights[k]
    return RawImage(np.rint(chans).astype(np.uint8).transpose(1, 2, 0))


def log_threshold_decompose(img, dtype=np.float32):
    """Binary maps I >= t for t = 1, 2, 4, ..., 128, ascending per channel."""
    chans = _intensities(img)
    return _log_from_intensities(chans[None], dtype)


def _log_from_intensities(chans, dtype):
    n, _, h, w = chans.shape
    planes = np.empty((n, 3 * PLANES_PER_CHANNEL, h, w), dtype=dtype)
    for c in range(3):
        for k, t in enumerate(LOG_THRESHOLDS):
            planes[:, c * PLANES_PER_CHANNEL + k] = chans[:, c] >= t
    return planes


def quant_threshold_decompose(img, levels=DEFAULT_QUANT_LEVELS, dtype=np.float32):
    """Requantize each channel to t_j levels; map value is level/(t_j - 1) in [0,1].

    The level index is floor(I * (t_j - 1) / 255); dividing it by t_j - 1 gives
    the unit-space value directly, which keeps the arithmetic exact for
    integer inputs.
    """
    for t in levels:
        if int(t) < 2:
            raise InvalidLevelCount(f"level count must be >= 2, got {t}")
    chans = _intensities(img)
    return _quant_from_intensities(chans[None], tuple(int(t) for t in levels), dtype)


def _quant_from_intensities(chans, levels, dtype):
    n, _, h, w = chans.shape
    planes = np.empty((n, 3 * len(levels), h, w), dtype=dtype)
    scaled = chans.astype(np.float64)
    for c in range(3):
        for j, t in enumerate(levels):
            k = np.floor(scaled[:, c] * (t - 1) / 255.0)
            planes[:, c * len(levels) + j] = k / float(t - 1)
    return planes


def decompose_tensor(x, mode):
    """Decompose a unit-range tensor (N, 3, H, W) under ``mode``.

    Intensities are recovered by rounding x*255; inputs that came through
    :func:`simi.imageio.to_unit_tensor` recover their exact 8-bit values.
    """
    x = np.asarray(x)
    if x.ndim != 4 or x.shape[1] != 3:
        raise ChannelCountMismatch(f"expected (N, 3, H, W), got {x.shape}")
    chans = np.clip(np.rint(x.astype(np.float64) * 255.0), 0, 255).astype(np.uint8)
    dtype = x.dtype
    if mode.variant == "bitplane":
        return _bitplane_from_intensities(chans, dtype)
    if mode.variant == "log":
        return _log_from_intensities(chans, dtype)
    return _quant_from_intensities(chans, mode.quant_levels, dtype)
