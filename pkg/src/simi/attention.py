"""Channel-then-spatial feature gating over the mined feature stack.

The block follows the convolutional block attention pattern: a shared
two-layer MLP squashes global average- and max-pooled channel
descriptors into per-channel gates, then a small conv over the stacked
channel-wise mean and max maps produces a per-pixel gate. Both gates
pass through a logistic, so they live in (0,1) and the block can only
attenuate. The channel-then-spatial order is fixed and is part of the
checkpoint contract.
"""

from dataclasses import dataclass

from . import autodiff as ad
from .autodiff import Node
from .errors import ShapeMismatch
from .optim import kaiming_uniform

REDUCTION = 4
SPATIAL_KERNEL = 7


@dataclass
class AttentionParams:
    """Weights for one attention block.

    channel_w1 (C, hidden) and channel_w2 (hidden, C) form the shared
    pooling MLP; spatial_w (1, 2, k, k) convolves the stacked mean/max
    maps. There are no biases: zero weights leave every gate at
    logistic(0) = 0.5.
    """

    channel_w1: Node
    channel_w2: Node
    spatial_w: Node

    def __post_init__(self):
        w1 = self.channel_w1.value
        w2 = self.channel_w2.value
        if w1.ndim != 2 or w2.ndim != 2 or w2.shape != (w1.shape[1], w1.shape[0]):
            raise ShapeMismatch(
                f"channel MLP weights must be (C, hidden) and (hidden, C), got {w1.shape} and {w2.shape}"
            )
        sw = self.spatial_w.value.shape
        if len(sw) != 4 or sw[0] != 1 or sw[1] != 2 or sw[2] != sw[3]:
            raise ShapeMismatch(f"spatial kernel must be shaped (1, 2, k, k), got {sw}")
        if sw[2] % 2 == 0:
            raise ValueError(f"spatial kernel size must be odd, got {sw[2]}")

    @property
    def channels(self):
        return self.channel_w1.value.shape[0]


def init_attention_params(store, rng, channels, reduction=REDUCTION,
                          spatial_kernel=SPATIAL_KERNEL, prefix="attn."):
    """Create attention weights in ``store`` under ``prefix``.

    The MLP bottleneck is max(1, channels // reduction); floor division
    keeps channel counts that are not multiples of the ratio usable.
    """
    hidden = max(1, channels // reduction)
    w1 = store.add(prefix + "channel_w1",
                   kaiming_uniform(rng, (channels, hidden), fan_in=channels, dtype=store.dtype))
    w2 = store.add(prefix + "channel_w2",
                   kaiming_uniform(rng, (hidden, channels), fan_in=hidden, dtype=store.dtype))
    k = spatial_kernel
    sw = store.add(prefix + "spatial_w",
                   kaiming_uniform(rng, (1, 2, k, k), fan_in=2 * k * k, dtype=store.dtype))
    return AttentionParams(w1, w2, sw)


def attention_params_from(store, prefix="attn."):
    return AttentionParams(store[prefix + "channel_w1"],
                           store[prefix + "channel_w2"],
                           store[prefix + "spatial_w"])


def _check_input(x, params):
    if x.value.ndim != 4:
        raise ShapeMismatch(f"attention input must be (N, C, H, W), got {x.value.shape}")
    if x.value.shape[1] != params.channels:
        raise ShapeMismatch(
            f"input has {x.value.shape[1]} channels but attention weights expect {params.channels}"
        )


def channel_gates(x, params):
    """Per-channel gates in (0,1), shaped (N, C, 1, 1)."""
    _check_input(x, params)
    n, c = x.value.shape[:2]
    avg = ad.reduce_mean(x, axes=(2, 3))
    mx = ad.reduce_max(x, axes=(2, 3))

    def mlp(descriptor):
        return ad.matmul(ad.relu(ad.matmul(descriptor, params.channel_w1)), params.channel_w2)

    gates = ad.logistic(mlp(avg) + mlp(mx))
    return ad.reshape(gates, (n, c, 1, 1))


def spatial_gates(x, params):
    """Per-pixel gates in (0,1), shaped (N, 1, H, W)."""
    _check_input(x, params)
    mean_map = ad.reduce_mean(x, axes=(1,), keepdims=True)
    max_map = ad.reduce_max(x, axes=(1,), keepdims=True)
    stacked = ad.concat([mean_map, max_map], axis=1)
    k = params.spatial_w.value.shape[2]
    return ad.logistic(ad.conv2d(stacked, params.spatial_w, padding=k // 2))


def channel_attention(x, params):
    return x * channel_gates(x, params)


def spatial_attention(x, params):
    return x * spatial_gates(x, params)


def cbam(x, params):
    """Channel attention then spatial attention; output shape = input shape."""
    return spatial_attention(channel_attention(x, params), params)
