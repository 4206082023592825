"""The enhancement network and its recursive curve update.

Pipeline: decompose the input into 24 binary/threshold planes, run S
smoothing units over them, concatenate the raw RGB channels back on,
gate the 27-channel stack with channel+spatial attention, project to F
feature channels, then run D cascaded curve blocks. Each block emits a
residual-refined feature map plus a curve pair (L1, L2) that drives one
application of the recursive update

    I_i = I_{i-1} + I_{i-1} (L1 - I_{i-1}) * L1 / (sigma(L2 - I_{i-1} - 0.1) * L2)

with sigma the sharp logistic 1/(1+e^{-10x}), clamped to [0,1] per stage.

Setting ``use_simm=False`` swaps the decomposition + smoothing front end
for a learned 1x1 lift of the RGB channels to the same 24-channel shape;
everything downstream is unchanged. That variant exists for the ablation
harness.
"""

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .attention import attention_params_from, cbam, init_attention_params
from .autodiff import Node
from .decompose import PLANES_PER_CHANNEL, DecompositionMode, decompose_tensor
from .errors import ShapeMismatch
from .optim import ParamStore, kaiming_uniform

# Lowest denominator Eq. 1 can reach on valid inputs: L2 >= 1e-3 and
# I <= 1 give sigma(L2 - I - 0.1) >= sigma(-1.099) ~ 1.69e-5, so the
# product stays above ~1.69e-8. The runtime floor sits below that and
# only fires on out-of-range curves or numerical garbage.
DENOMINATOR_FLOOR = 1e-9


@dataclass(frozen=True)
class EnhancerConfig:
    stages: int = 7
    smoothing_units: int = 2
    feature_channels: int = 16
    decomposition: DecompositionMode = field(default_factory=DecompositionMode)
    epsilon_floor: float = 1e-3
    seed: int = 0
    use_simm: bool = True

    def __post_init__(self):
        if self.stages < 1:
            raise ValueError(f"stages must be >= 1, got {self.stages}")
        if self.smoothing_units < 0:
            raise ValueError(f"smoothing_units must be >= 0, got {self.smoothing_units}")
        if self.feature_channels < 1:
            raise ValueError(f"feature_channels must be >= 1, got {self.feature_channels}")
        if not self.epsilon_floor > 0:
            raise ValueError(f"epsilon_floor must be > 0, got {self.epsilon_floor}")

    def to_dict(self):
        return {
            "stages": self.stages,
            "smoothing_units": self.smoothing_units,
            "feature_channels": self.feature_channels,
            "decomposition": {
                "variant": self.decomposition.variant,
                "quant_levels": list(self.decomposition.quant_levels),
            },
            "epsilon_floor": self.epsilon_floor,
            "seed": self.seed,
            "use_simm": self.use_simm,
        }

    @classmethod
    def from_dict(cls, d):
        dec = d.get("decomposition", {})
        mode = DecompositionMode(
            variant=dec.get("variant", "bitplane"),
            quant_levels=tuple(dec.get("quant_levels", ())) or None,
        )
        return cls(
            stages=d["stages"],
            smoothing_units=d["smoothing_units"],
            feature_channels=d["feature_channels"],
            decomposition=mode,
            epsilon_floor=d["epsilon_floor"],
            seed=d["seed"],
            use_simm=d.get("use_simm", True),
        )


@dataclass
class CurvePair:
    """Per-stage cue maps: L1 in (0,1), L2 in [epsilon_floor, 1)."""

    l1: Node
    l2: Node


@dataclass
class EnhancementTrace:
    """Intermediate images I_0..I_D plus the curve pair of every stage."""

    images: list
    curves: list

    @property
    def output(self):
        return self.images[-1]


PLANE_COUNT = 3 * PLANES_PER_CHANNEL  # front end always emits 24 maps
ATTENTION_CHANNELS = PLANE_COUNT + 3  # plus the raw RGB channels


def init_params(store, config):
    """Populate ``store`` with freshly initialized weights.

    Insertion order is fixed (front end, attention, entry projection,
    blocks) because checkpoints serialize parameters in store order.
    """
    rng = np.random.default_rng(config.seed)
    f = config.feature_channels
    if config.use_simm:
        for i in range(config.smoothing_units):
            store.add(f"smooth{i}.w",
                      kaiming_uniform(rng, (PLANE_COUNT, PLANE_COUNT, 3, 3),
                                      fan_in=PLANE_COUNT * 9, dtype=store.dtype))
            store.add(f"smooth{i}.b", np.zeros(PLANE_COUNT, dtype=store.dtype))
    else:
        store.add("simm.lift_w",
                  kaiming_uniform(rng, (PLANE_COUNT, 3, 1, 1), fan_in=3, dtype=store.dtype))
        store.add("simm.lift_b", np.zeros(PLANE_COUNT, dtype=store.dtype))
    init_attention_params(store, rng, ATTENTION_CHANNELS)
    store.add("entry.w",
              kaiming_uniform(rng, (f, ATTENTION_CHANNELS, 3, 3),
                              fan_in=ATTENTION_CHANNELS * 9, dtype=store.dtype))
    store.add("entry.b", np.zeros(f, dtype=store.dtype))
    for i in range(config.stages):
        for name, shape, fan_in in (
            ("conv1_w", (f, f, 3, 3), f * 9),
            ("conv2_w", (f, f, 3, 3), f * 9),
            ("l1_w", (3, f, 3, 3), f * 9),
            ("l2_w", (3, f, 3, 3), f * 9),
        ):
            store.add(f"block{i}.{name}", kaiming_uniform(rng, shape, fan_in, dtype=store.dtype))
            store.add(f"block{i}.{name[:-1]}b",
                      np.zeros(shape[0], dtype=store.dtype))
    return store


def param_count(config):
    return init_params(ParamStore(), config).param_count()


def smoothing_stack(planes, params):
    """Apply the S smoothing units: conv3x3 (same padding) + SiLU each.

    ``params`` is a list of (weight, bias) node pairs; an empty list is
    the identity.
    """
    out = planes
    for w, b in params:
        out = ad.silu(ad.conv2d(out, w, b, padding=1))
    return out


@dataclass
class BlockParams:
    conv1_w: Node
    conv1_b: Node
    conv2_w: Node
    conv2_b: Node
    l1_w: Node
    l1_b: Node
    l2_w: Node
    l2_b: Node


def block_params_from(store, index):
    p = f"block{index}."
    return BlockParams(*(store[p + n] for n in (
        "conv1_w", "conv1_b", "conv2_w", "conv2_b",
        "l1_w", "l1_b", "l2_w", "l2_b")))


def dea_block(features, params, epsilon_floor=1e-3):
    """Residual trunk + two curve heads.

    Trunk: conv3x3 -> SiLU -> conv3x3, added back onto the input.
    Heads: L1 = logistic(conv(trunk)); L2 = eps + (1-eps)*logistic(conv(trunk)),
    so L1 lives in (0,1) and L2 in [eps, 1). Returns (features', CurvePair).
    """
    if features.value.ndim != 4:
        raise ShapeMismatch(f"block input must be (N, F, H, W), got {features.value.shape}")
    t = ad.silu(ad.conv2d(features, params.conv1_w, params.conv1_b, padding=1))
    t = ad.conv2d(t, params.conv2_w, params.conv2_b, padding=1)
    refined = features + t
    l1 = ad.logistic(ad.conv2d(refined, params.l1_w, params.l1_b, padding=1))
    raw = ad.logistic(ad.conv2d(refined, params.l2_w, params.l2_b, padding=1))
    l2 = raw * (1.0 - epsilon_floor) + epsilon_floor
    return refined, CurvePair(l1, l2)


def recursive_update(i_prev, curves, clamp_output=True,
                     denominator_floor=DENOMINATOR_FLOOR):
    """One enhancement step.

    I = I_prev + I_prev (L1 - I_prev) * L1 / (sigma(L2 - I_prev - 0.1) * L2)
    with sigma(x) = 1/(1+e^{-10x}). The denominator is floor-checked at
    runtime; see DENOMINATOR_FLOOR for why it cannot fire on in-range
    inputs.
    """
    l1, l2 = curves.l1, curves.l2
    if l1.value.shape != i_prev.value.shape or l2.value.shape != i_prev.value.shape:
        raise ShapeMismatch(
            f"curve maps {l1.value.shape}/{l2.value.shape} do not match image {i_prev.value.shape}"
        )
    denom = ad.sharp_sigmoid(l2 - i_prev - 0.1) * l2
    modulation = ad.div(l1, denom, min_denominator=denominator_floor)
    out = i_prev + i_prev * (l1 - i_prev) * modulation
    if clamp_output:
        out = ad.clamp(out, 0.0, 1.0)
    return out


def forward(x, store, config, curve_hook=None):
    """Run the full network on a unit-range tensor.

    x: (N, 3, H, W) numpy array or Node with values in [0,1]. The
    optional ``curve_hook(stage, image, curves) -> CurvePair`` lets tests
    substitute curve maps before each update. Returns an
    EnhancementTrace whose last image is the enhanced output.
    """
    if not isinstance(x, Node):
        x = ad.constant(np.asarray(x, dtype=store.dtype))
    if x.value.ndim != 4 or x.value.shape[1] != 3:
        raise ShapeMismatch(f"input must be (N, 3, H, W), got {x.value.shape}")

    if config.use_simm:
        planes = ad.constant(decompose_tensor(x.value, config.decomposition))
        smooth = [(store[f"smooth{i}.w"], store[f"smooth{i}.b"])
                  for i in range(config.smoothing_units)]
        features = smoothing_stack(planes, smooth)
    else:
        features = ad.conv2d(x, store["simm.lift_w"], store["simm.lift_b"])

    stack = ad.concat([features, x], axis=1)
    gated = cbam(stack, attention_params_from(store))
    feats = ad.silu(ad.conv2d(gated, store["entry.w"], store["entry.b"], padding=1))

    image = x
    images = [image]
    curve_list = []
    for i in range(config.stages):
        feats, pair = dea_block(feats, block_params_from(store, i), config.epsilon_floor)
        if curve_hook is not None:
            pair = curve_hook(i, image, pair)
        image = recursive_update(image, pair)
        images.append(image)
        curve_list.append(pair)
    return EnhancementTrace(images, curve_list)
