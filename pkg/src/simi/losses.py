"""Zero-reference losses: local color, global chroma, brightness, smoothness.

No ground truth anywhere. The four terms judge the enhanced output
against the input's color statistics, a gray-world prior, a brightness
target derived from the input, and the smoothness of the predicted
curve maps. Norms are realized as means over pixels so the published
weight ratios stay meaningful at any resolution; batch aggregation is
per-image means then the batch mean.
"""

import json
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .errors import EmptyTrace, ShapeMismatch

COLOR_EPSILON = 1e-4
DEFAULT_EXPOSURE = 0.6
ONE_THIRD = 1.0 / 3.0


@dataclass(frozen=True)
class LossWeights:
    """Term weights; defaults follow the 200:300:1:200:1000 ratio."""

    alpha: float = 200.0
    beta: float = 300.0
    gamma: float = 1.0
    delta1: float = 200.0
    delta2: float = 1000.0


@dataclass
class LossReport:
    """Per-batch loss values in double precision.

    ``total`` is recomputed from the terms at report time, so the
    bookkeeping identity total = a*lc + b*g + c*lu + d1*s1 + d2*s2 holds
    exactly on the reported floats.
    """

    lc: float
    g: float
    lu: float
    s1: float
    s2: float
    total: float

    def json_line(self, step):
        return json.dumps({"step": step, "lc": self.lc, "g": self.g,
                           "lu": self.lu, "s1": self.s1, "s2": self.s2,
                           "total": self.total})


def _require_rgb(x, who):
    if x.value.ndim != 4 or x.value.shape[1] != 3:
        raise ShapeMismatch(f"{who} expects (N, 3, H, W), got {x.value.shape}")


def color_factors(img):
    """Per-pixel channel factors F^c = I^c / (sum_c I^c + eps).

    The offset keeps black pixels at factor 0 instead of 0/0; factors
    sum to just under 1 everywhere else.
    """
    _require_rgb(img, "color_factors")
    total = ad.reduce_sum(img, axes=(1,), keepdims=True) + COLOR_EPSILON
    return ad.div(img, total, min_denominator=COLOR_EPSILON / 2)


def loss_local_color(inp, out):
    """Sum over channels of the mean absolute factor-map difference."""
    _require_rgb(inp, "loss_local_color")
    if inp.value.shape != out.value.shape:
        raise ShapeMismatch(
            f"input {inp.value.shape} and output {out.value.shape} differ")
    diff = ad.absval(color_factors(inp) - color_factors(out))
    return ad.total_sum(ad.reduce_mean(diff, axes=(0, 2, 3)))


def loss_global_chroma(out, on_factors=True):
    """Gray-world prior: sum_c (phi^c - 1/3)^2, batch-averaged.

    phi^c is the spatial mean of channel c's color-factor map, which
    makes the 1/3 target exact for gray images at any brightness. Set
    on_factors=False to read phi as the raw channel mean instead.
    """
    _require_rgb(out, "loss_global_chroma")
    base = color_factors(out) if on_factors else out
    phi = ad.reduce_mean(base, axes=(2, 3))
    per_image = ad.reduce_sum(ad.square(phi - ONE_THIRD), axes=(1,))
    return ad.mean(per_image)


def brightness_target(inp_values, exposure=DEFAULT_EXPOSURE):
    """Per-image brightness target B = 3E(1 - sum_c rms(F_in^c - 1/3)).

    Computed outside the graph: the target depends only on the input,
    so it is a constant with respect to the parameters. Returns an
    (N, 1, 1, 1) array for broadcasting.
    """
    x = np.asarray(inp_values)
    total = x.sum(axis=1, keepdims=True) + COLOR_EPSILON
    factors = x / total
    dev = factors - ONE_THIRD
    rms = np.sqrt(np.mean(dev * dev, axis=(2, 3), keepdims=True))
    b = 3.0 * exposure * (1.0 - rms.sum(axis=1, keepdims=True))
    return b.astype(x.dtype)


def loss_brightness(inp, out, exposure=DEFAULT_EXPOSURE):
    """Mean squared gap between summed output channels and the target B."""
    _require_rgb(inp, "loss_brightness")
    if inp.value.shape != out.value.shape:
        raise ShapeMismatch(
            f"input {inp.value.shape} and output {out.value.shape} differ")
    b = brightness_target(inp.value, exposure)
    summed = ad.reduce_sum(out, axes=(1,), keepdims=True)
    return ad.mean(ad.square(summed - b))


def loss_smoothness(curves):
    """Curve regularizers (s1, s2): mean over stages of the per-pixel
    average squared forward-difference energy, summed over channels."""
    if not curves:
        raise EmptyTrace("no curve pairs to regularize")

    def energy(m):
        n, _, h, w = m.value.shape
        dx, dy = ad.spatial_gradient(m)
        return ad.total_sum(ad.square(dx) + ad.square(dy)) * (1.0 / (n * h * w))

    inv = 1.0 / len(curves)
    s1 = s2 = None
    for pair in curves:
        e1, e2 = energy(pair.l1) * inv, energy(pair.l2) * inv
        s1 = e1 if s1 is None else s1 + e1
        s2 = e2 if s2 is None else s2 + e2
    return s1, s2


def loss_total(inp, trace, weights=LossWeights(), exposure=DEFAULT_EXPOSURE,
               chroma_on_factors=True):
    """Weighted sum of all terms over a trace; returns (Node, LossReport)."""
    out = trace.output
    lc = loss_local_color(inp, out)
    g = loss_global_chroma(out, on_factors=chroma_on_factors)
    lu = loss_brightness(inp, out, exposure)
    s1, s2 = loss_smoothness(trace.curves)
    total = (lc * weights.alpha + g * weights.beta + lu * weights.gamma
             + s1 * weights.delta1 + s2 * weights.delta2)
    vals = [float(t.value) for t in (lc, g, lu, s1, s2)]
    report_total = (weights.alpha * vals[0] + weights.beta * vals[1]
                    + weights.gamma * vals[2] + weights.delta1 * vals[3]
                    + weights.delta2 * vals[4])
    return total, LossReport(*vals, report_total)
