"""Finite-difference validation of every differentiable op and the full loss.

Central differences in double precision: h = 1e-6 * max(1, |theta|),
relative error |a - n| / max(|a| + |n|, 1e-3). Inputs for kinked ops
(relu, abs, clamp, max) are sampled away from their kinks, since a
finite-difference stencil straddling a kink says nothing about the
analytic gradient.
"""

import numpy as np

from . import autodiff as ad
from . import enhancer, losses
from .attention import AttentionParams, cbam
from .enhancer import BlockParams, CurvePair, EnhancerConfig
from .optim import ParamStore

H_SCALE = 1e-6
ERROR_FLOOR = 1e-3
PASS_THRESHOLD = 1e-4


def rel_error(a, b, floor=ERROR_FLOOR):
    return abs(a - b) / max(abs(a) + abs(b), floor)


def check_gradients(build, leaves, rng=None, max_entries=None, h_scale=H_SCALE):
    """Worst relative error between backprop and central differences.

    ``build`` reconstructs the scalar loss from the leaves' current
    values on every call; leaf values are perturbed in place. With
    ``max_entries`` set, at most that many randomly chosen entries are
    probed per leaf.
    """
    for leaf in leaves:
        leaf.grad = None
    ad.backward(build())
    analytic = [np.array(leaf.grad, copy=True) for leaf in leaves]

    worst = 0.0
    for leaf, grad in zip(leaves, analytic):
        size = leaf.value.size
        if max_entries is not None and size > max_entries:
            indices = rng.choice(size, size=max_entries, replace=False)
        else:
            indices = range(size)
        for i in indices:
            theta = leaf.value.flat[i]
            h = h_scale * max(1.0, abs(theta))
            leaf.value.flat[i] = theta + h
            f_plus = float(build().value)
            leaf.value.flat[i] = theta - h
            f_minus = float(build().value)
            leaf.value.flat[i] = theta
            numeric = (f_plus - f_minus) / (2.0 * h)
            worst = max(worst, rel_error(float(grad.flat[i]), numeric))
    return worst


def _leaf(rng, shape, lo=-1.0, hi=1.0):
    return ad.parameter(rng.uniform(lo, hi, shape))


def _kink_free(rng, shape, margin=0.2):
    # magnitudes >= margin keep the FD stencil away from the origin kink
    mag = rng.uniform(margin, 1.0, shape)
    return ad.parameter(mag * rng.choice([-1.0, 1.0], shape))


def _weighted(out, weight):
    return ad.total_sum(out * weight)


def _binary_checks(rng):
    shape = (3, 4)
    w = rng.uniform(0.5, 1.5, shape)
    checks = {}
    a, b = _leaf(rng, shape), _leaf(rng, shape)
    checks["add"] = check_gradients(lambda: _weighted(a + b, w), [a, b])
    checks["sub"] = check_gradients(lambda: _weighted(a - b, w), [a, b])
    checks["mul"] = check_gradients(lambda: _weighted(a * b, w), [a, b])
    num, den = _leaf(rng, shape), _kink_free(rng, shape, margin=0.5)
    checks["div"] = check_gradients(
        lambda: _weighted(ad.div(num, den, min_denominator=1e-6), w), [num, den])
    bcast = _leaf(rng, (1, 4))
    checks["broadcast_mul"] = check_gradients(lambda: _weighted(a * bcast, w), [a, bcast])
    checks["neg"] = check_gradients(lambda: _weighted(-a, w), [a])
    return checks


def _unary_checks(rng):
    shape = (3, 4)
    w = rng.uniform(0.5, 1.5, shape)
    checks = {}
    x = _leaf(rng, shape)
    checks["logistic"] = check_gradients(lambda: _weighted(ad.logistic(x), w), [x])
    checks["sharp_sigmoid"] = check_gradients(lambda: _weighted(ad.sharp_sigmoid(x), w), [x])
    checks["silu"] = check_gradients(lambda: _weighted(ad.silu(x), w), [x])
    checks["square"] = check_gradients(lambda: _weighted(ad.square(x), w), [x])
    kf = _kink_free(rng, shape)
    checks["relu"] = check_gradients(lambda: _weighted(ad.relu(kf), w), [kf])
    checks["absval"] = check_gradients(lambda: _weighted(ad.absval(kf), w), [kf])
    # half strictly inside (-0.5, 0.5), half strictly outside, all >= 0.15
    # away from the clamp edges
    inner = rng.uniform(-0.35, 0.35, shape)
    outer = rng.uniform(0.65, 1.0, shape) * rng.choice([-1.0, 1.0], shape)
    mix = np.where(rng.random(shape) < 0.5, inner, outer)
    cl = ad.parameter(mix)
    checks["clamp"] = check_gradients(
        lambda: _weighted(ad.clamp(cl, -0.5, 0.5), w), [cl])
    return checks


def _shape_checks(rng):
    checks = {}
    x = _leaf(rng, (2, 3, 4))
    w_full = rng.uniform(0.5, 1.5, (2, 3, 4))
    w_ax = rng.uniform(0.5, 1.5, (2, 4))
    checks["reduce_sum"] = check_gradients(
        lambda: _weighted(ad.reduce_sum(x, axes=(1,)), w_ax), [x])
    checks["reduce_mean"] = check_gradients(
        lambda: _weighted(ad.reduce_mean(x, axes=(1,)), w_ax), [x])
    distinct = ad.parameter(rng.permutation(np.linspace(-1.0, 1.0, 24)).reshape(2, 3, 4))
    checks["reduce_max"] = check_gradients(
        lambda: _weighted(ad.reduce_max(distinct, axes=(1,)), w_ax), [distinct])
    a, b = _leaf(rng, (2, 2, 4)), _leaf(rng, (2, 1, 4))
    w_cat = rng.uniform(0.5, 1.5, (2, 3, 4))
    checks["concat"] = check_gradients(
        lambda: _weighted(ad.concat([a, b], axis=1), w_cat), [a, b])
    r = _leaf(rng, (2, 6))
    w_r = rng.uniform(0.5, 1.5, (3, 4))
    checks["reshape"] = check_gradients(
        lambda: _weighted(ad.reshape(r, (3, 4)), w_r), [r])
    m1, m2 = _leaf(rng, (3, 4)), _leaf(rng, (4, 5))
    w_m = rng.uniform(0.5, 1.5, (3, 5))
    checks["matmul"] = check_gradients(
        lambda: _weighted(ad.matmul(m1, m2), w_m), [m1, m2])
    img = _leaf(rng, (1, 2, 4, 5))
    w_img = rng.uniform(0.5, 1.5, (1, 2, 4, 5))
    checks["diff_x"] = check_gradients(lambda: _weighted(ad.diff_x(img), w_img), [img])
    checks["diff_y"] = check_gradients(lambda: _weighted(ad.diff_y(img), w_img), [img])
    return checks


def _conv_checks(rng):
    checks = {}
    x = _leaf(rng, (2, 3, 6, 6))
    w = _leaf(rng, (4, 3, 3, 3))
    b = _leaf(rng, (4,))
    ww = rng.uniform(0.5, 1.5, (2, 4, 6, 6))
    checks["conv2d"] = check_gradients(
        lambda: _weighted(ad.conv2d(x, w, b, padding=1), ww), [x, w, b])
    xs = _leaf(rng, (1, 2, 7, 7))
    ws = _leaf(rng, (3, 2, 3, 3))
    w_out = rng.uniform(0.5, 1.5, (1, 3, 3, 3))
    checks["conv2d_stride2"] = check_gradients(
        lambda: _weighted(ad.conv2d(xs, ws, stride=2), w_out), [xs, ws])
    return checks


def _module_checks(rng):
    checks = {}
    x = _leaf(rng, (2, 8, 6, 6), lo=0.05, hi=0.95)
    params = AttentionParams(_leaf(rng, (8, 2), lo=-0.5, hi=0.5),
                             _leaf(rng, (2, 8), lo=-0.5, hi=0.5),
                             _leaf(rng, (1, 2, 7, 7), lo=-0.3, hi=0.3))
    leaves = [x, params.channel_w1, params.channel_w2, params.spatial_w]
    w = rng.uniform(0.5, 1.5, (2, 8, 6, 6))
    checks["cbam"] = check_gradients(
        lambda: _weighted(cbam(x, params), w), leaves, rng, max_entries=32)

    f = _leaf(rng, (1, 4, 6, 6), lo=-0.5, hi=0.5)
    bp = BlockParams(_leaf(rng, (4, 4, 3, 3), lo=-0.3, hi=0.3), _leaf(rng, (4,), lo=-0.1, hi=0.1),
                     _leaf(rng, (4, 4, 3, 3), lo=-0.3, hi=0.3), _leaf(rng, (4,), lo=-0.1, hi=0.1),
                     _leaf(rng, (3, 4, 3, 3), lo=-0.3, hi=0.3), _leaf(rng, (3,), lo=-0.1, hi=0.1),
                     _leaf(rng, (3, 4, 3, 3), lo=-0.3, hi=0.3), _leaf(rng, (3,), lo=-0.1, hi=0.1))
    block_leaves = [f, bp.conv1_w, bp.conv1_b, bp.conv2_w, bp.conv2_b,
                    bp.l1_w, bp.l1_b, bp.l2_w, bp.l2_b]
    w1 = rng.uniform(0.5, 1.5, (1, 3, 6, 6))
    w2 = rng.uniform(0.5, 1.5, (1, 3, 6, 6))
    wf = rng.uniform(0.5, 1.5, (1, 4, 6, 6))

    def build_block():
        refined, pair = enhancer.dea_block(f, bp)
        return _weighted(pair.l1, w1) + _weighted(pair.l2, w2) + _weighted(refined, wf)

    checks["dea_block"] = check_gradients(build_block, block_leaves, rng, max_entries=32)

    prev = _leaf(rng, (1, 3, 5, 5), lo=0.05, hi=0.95)
    l1 = _leaf(rng, (1, 3, 5, 5), lo=0.1, hi=0.9)
    l2 = _leaf(rng, (1, 3, 5, 5), lo=0.2, hi=0.9)
    w_u = rng.uniform(0.5, 1.5, (1, 3, 5, 5))
    checks["recursive_update"] = check_gradients(
        lambda: _weighted(enhancer.recursive_update(prev, CurvePair(l1, l2),
                                                    clamp_output=False), w_u),
        [prev, l1, l2], rng, max_entries=48)
    return checks


def _loss_checks(rng):
    checks = {}
    inp = ad.constant(rng.uniform(0.05, 0.6, (1, 3, 6, 6)))
    out = _leaf(rng, (1, 3, 6, 6), lo=0.02, hi=0.98)
    checks["loss_local_color"] = check_gradients(
        lambda: losses.loss_local_color(inp, out), [out])
    checks["loss_global_chroma"] = check_gradients(
        lambda: losses.loss_global_chroma(out), [out])
    checks["loss_global_chroma_raw"] = check_gradients(
        lambda: losses.loss_global_chroma(out, on_factors=False), [out])
    checks["loss_brightness"] = check_gradients(
        lambda: losses.loss_brightness(inp, out), [out])
    c1a, c1b = _leaf(rng, (1, 3, 5, 5), lo=0.1, hi=0.9), _leaf(rng, (1, 3, 5, 5), lo=0.1, hi=0.9)
    c2a, c2b = _leaf(rng, (1, 3, 5, 5), lo=0.1, hi=0.9), _leaf(rng, (1, 3, 5, 5), lo=0.1, hi=0.9)

    def build_smooth():
        s1, s2 = losses.loss_smoothness([CurvePair(c1a, c1b), CurvePair(c2a, c2b)])
        return s1 + 2.0 * s2

    checks["loss_smoothness"] = check_gradients(build_smooth, [c1a, c1b, c2a, c2b])
    return checks


def _full_loss_check(rng, size):
    config = EnhancerConfig(stages=2, smoothing_units=1, feature_channels=4)
    store = ParamStore(dtype=np.float64)
    enhancer.init_params(store, config)
    x = rng.uniform(0.05, 0.6, (1, 3, size, size))
    leaves = [store[name] for name in store.names()]

    def build():
        trace = enhancer.forward(x, store, config)
        total, _ = losses.loss_total(ad.constant(x), trace)
        return total

    return check_gradients(build, leaves, rng, max_entries=4)


def run_suite(size=8, seed=1):
    """Run every check; returns (max_rel_error, {check_name: rel_error})."""
    rng = np.random.default_rng(seed)
    results = {}
    results.update(_binary_checks(rng))
    results.update(_unary_checks(rng))
    results.update(_shape_checks(rng))
    results.update(_conv_checks(rng))
    results.update(_module_checks(rng))
    results.update(_loss_checks(rng))
    results["full_loss"] = _full_loss_check(rng, size)
    return max(results.values()), results
