"""Minimal reverse-mode automatic differentiation over numpy arrays.

A Node wraps an ndarray plus the closure that routes upstream gradients to
its parents. Graphs are built eagerly by the op functions below and torn
down by the garbage collector after each training step. backward() walks
the graph once in reverse topological order; fan-out accumulates by
summation.

Ops preserve the dtype of their inputs: float64 for gradient checking,
float32 for training.
"""

import numpy as np

from .errors import (
    DivisionRangeViolation,
    NonPositiveStride,
    NonScalarLoss,
    ShapeMismatch,
)


class Node:
    """One value in the computation graph."""

    __slots__ = ("value", "grad", "parents", "requires_grad", "_backward")

    def __init__(self, value, parents=(), backward=None, requires_grad=False):
        self.value = np.asarray(value)
        self.parents = parents
        self.requires_grad = requires_grad or any(p.requires_grad for p in parents)
        self._backward = backward
        self.grad = None

    @property
    def shape(self):
        return self.value.shape

    def __repr__(self):
        return f"Node(shape={self.value.shape}, requires_grad={self.requires_grad})"

    # Operator sugar; the right operand may be a Node or a python scalar.
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        # other + (-self); keeps python scalars weakly typed so float32
        # graphs stay float32.
        return add(neg(self), other)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(self, other)

    def __truediv__(self, other):
        return div(self, other)

    def __neg__(self):
        return neg(self)


def constant(value, dtype=None):
    return Node(np.asarray(value, dtype=dtype))


def parameter(value):
    return Node(np.asarray(value), requires_grad=True)


def _unbroadcast(grad, shape):
    """Sum a broadcasted gradient back down to ``shape``."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, dim in enumerate(shape):
        if dim == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _accum(node, grad):
    # first contribution is stored, later ones added; avoids a zeros
    # pass over every interior buffer per backward call
    if node.requires_grad:
        g = _unbroadcast(grad, node.value.shape)
        node.grad = g if node.grad is None else node.grad + g


def _binary_values(a, b):
    """Split a binary op's operands into (node-or-None, raw value) pairs.

    Non-Node operands are left as-is: python scalars stay weakly typed so
    they do not promote float32 graphs to float64.
    """
    an = a if isinstance(a, Node) else None
    bn = b if isinstance(b, Node) else None
    av = a.value if an is not None else a
    bv = b.value if bn is not None else b
    return an, av, bn, bv


def _shape_of(v):
    return getattr(v, "shape", ())


def add(a, b):
    an, av, bn, bv = _binary_values(a, b)
    try:
        out = av + bv
    except ValueError:
        raise ShapeMismatch(f"cannot add shapes {_shape_of(av)} and {_shape_of(bv)}")

    def backward(g):
        if an is not None:
            _accum(an, g)
        if bn is not None:
            _accum(bn, g)

    return Node(out, tuple(n for n in (an, bn) if n is not None), backward)


def sub(a, b):
    an, av, bn, bv = _binary_values(a, b)
    try:
        out = av - bv
    except ValueError:
        raise ShapeMismatch(f"cannot subtract shapes {_shape_of(av)} and {_shape_of(bv)}")

    def backward(g):
        if an is not None:
            _accum(an, g)
        if bn is not None:
            _accum(bn, -g)

    return Node(out, tuple(n for n in (an, bn) if n is not None), backward)


def mul(a, b):
    an, av, bn, bv = _binary_values(a, b)
    try:
        out = av * bv
    except ValueError:
        raise ShapeMismatch(f"cannot multiply shapes {_shape_of(av)} and {_shape_of(bv)}")

    def backward(g):
        if an is not None:
            _accum(an, g * bv)
        if bn is not None:
            _accum(bn, g * av)

    return Node(out, tuple(n for n in (an, bn) if n is not None), backward)


def div(a, b, min_denominator=0.0):
    """Elementwise a / b. With min_denominator > 0, raises if any
    |b| falls below it; callers are responsible for keeping denominators
    bounded away from zero."""
    an, av, bn, bv = _binary_values(a, b)
    if min_denominator > 0.0 and np.any(np.abs(bv) < min_denominator):
        raise DivisionRangeViolation(
            f"denominator below floor {min_denominator:g} "
            f"(min |denominator| = {np.min(np.abs(bv)):g})"
        )
    try:
        out = av / bv
    except ValueError:
        raise ShapeMismatch(f"cannot divide shapes {_shape_of(av)} and {_shape_of(bv)}")

    def backward(g):
        if an is not None:
            _accum(an, g / bv)
        if bn is not None:
            _accum(bn, -g * av / (bv * bv))

    return Node(out, tuple(n for n in (an, bn) if n is not None), backward)


def neg(x):
    def backward(g):
        _accum(x, -g)

    return Node(-x.value, (x,), backward)


def _stable_logistic(v):
    out = np.empty_like(v)
    pos = v >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-v[pos]))
    ev = np.exp(v[~pos])
    out[~pos] = ev / (1.0 + ev)
    return out


def logistic(x):
    """1 / (1 + exp(-x)) elementwise."""
    s = _stable_logistic(x.value)

    def backward(g):
        _accum(x, g * s * (1.0 - s))

    return Node(s, (x,), backward)


def sharp_sigmoid(x):
    """Steep logistic gate 1 / (1 + exp(-10 x))."""
    s = _stable_logistic(10.0 * x.value)

    def backward(g):
        _accum(x, g * 10.0 * s * (1.0 - s))

    return Node(s, (x,), backward)


def silu(x):
    """x * logistic(x); smooth, non-monotone near zero."""
    s = _stable_logistic(x.value)
    out = x.value * s

    def backward(g):
        _accum(x, g * (s + x.value * s * (1.0 - s)))

    return Node(out, (x,), backward)


def relu(x):
    out = np.maximum(x.value, 0.0)

    def backward(g):
        _accum(x, g * (x.value > 0))

    return Node(out, (x,), backward)


def absval(x):
    out = np.abs(x.value)

    def backward(g):
        _accum(x, g * np.sign(x.value))

    return Node(out, (x,), backward)


def square(x):
    out = x.value * x.value

    def backward(g):
        _accum(x, g * 2.0 * x.value)

    return Node(out, (x,), backward)


def clamp(x, lo, hi):
    """Clip to [lo, hi]; gradient passes only strictly inside the interval."""
    out = np.clip(x.value, lo, hi)
    mask = (x.value > lo) & (x.value < hi)

    def backward(g):
        _accum(x, g * mask)

    return Node(out, (x,), backward)


def _restore_axes(g, axes, in_shape):
    if axes is None:
        return np.broadcast_to(g, in_shape)
    expanded = np.expand_dims(g, axes) if g.ndim != len(in_shape) else g
    return np.broadcast_to(expanded, in_shape)


def reduce_sum(x, axes=None, keepdims=False):
    out = x.value.sum(axis=axes, keepdims=keepdims)

    def backward(g):
        gg = np.expand_dims(g, axes) if (axes is not None and not keepdims) else g
        _accum(x, np.broadcast_to(gg, x.value.shape))

    return Node(out, (x,), backward)


def reduce_mean(x, axes=None, keepdims=False):
    out = x.value.mean(axis=axes, keepdims=keepdims)
    if axes is None:
        count = x.value.size
    else:
        count = 1
        for a in np.atleast_1d(axes):
            count *= x.value.shape[a]
    count = int(count)  # python int: no dtype promotion of float32 grads

    def backward(g):
        gg = np.expand_dims(g, axes) if (axes is not None and not keepdims) else g
        _accum(x, np.broadcast_to(gg, x.value.shape) / count)

    return Node(out, (x,), backward)


def reduce_max(x, axes=None, keepdims=False):
    """Max over axes. Gradient routes to every element attaining the max,
    so ties fan the gradient out; inputs in this pipeline are generic."""
    out = x.value.max(axis=axes, keepdims=keepdims)

    def backward(g):
        gg = g
        full = out
        if not keepdims and axes is not None:
            gg = np.expand_dims(g, axes)
            full = np.expand_dims(out, axes)
        mask = x.value == full
        _accum(x, np.broadcast_to(gg, x.value.shape) * mask)

    return Node(out, (x,), backward)


def mean(x):
    return reduce_mean(x, axes=None)


def total_sum(x):
    return reduce_sum(x, axes=None)


def concat(nodes, axis=1):
    values = [n.value for n in nodes]
    out = np.concatenate(values, axis=axis)
    sizes = [v.shape[axis] for v in values]
    offsets = np.cumsum([0] + sizes)

    def backward(g):
        for node, start, stop in zip(nodes, offsets[:-1], offsets[1:]):
            if node.requires_grad:
                sl = [slice(None)] * g.ndim
                sl[axis] = slice(start, stop)
                _accum(node, g[tuple(sl)])

    return Node(out, tuple(nodes), backward)


def reshape(x, shape):
    out = x.value.reshape(shape)

    def backward(g):
        _accum(x, g.reshape(x.value.shape))

    return Node(out, (x,), backward)


def matmul(x, w):
    if x.value.ndim != 2 or w.value.ndim != 2 or x.value.shape[1] != w.value.shape[0]:
        raise ShapeMismatch(f"cannot matmul {x.value.shape} @ {w.value.shape}")
    out = x.value @ w.value

    def backward(g):
        if x.requires_grad:
            _accum(x, g @ w.value.T)
        if w.requires_grad:
            _accum(w, x.value.T @ g)

    return Node(out, (x, w), backward)


def diff_x(x):
    """Forward difference along the last axis; last column stays zero."""
    out = np.zeros_like(x.value)
    out[..., :-1] = x.value[..., 1:] - x.value[..., :-1]

    def backward(g):
        gx = np.zeros_like(x.value)
        gx[..., 1:] += g[..., :-1]
        gx[..., :-1] -= g[..., :-1]
        _accum(x, gx)

    return Node(out, (x,), backward)


def diff_y(x):
    """Forward difference along the second-to-last axis; last row stays zero."""
    out = np.zeros_like(x.value)
    out[..., :-1, :] = x.value[..., 1:, :] - x.value[..., :-1, :]

    def backward(g):
        gx = np.zeros_like(x.value)
        gx[..., 1:, :] += g[..., :-1, :]
        gx[..., :-1, :] -= g[..., :-1, :]
        _accum(x, gx)

    return Node(out, (x,), backward)


def spatial_gradient(x):
    """Forward-difference gradient maps (d/dx, d/dy), same shape as x."""
    return diff_x(x), diff_y(x)


def conv2d(x, weight, bias=None, stride=1, padding=0):
    """2-D cross-correlation with zero padding, via im2col + GEMM.

    x: (N, C, H, W), weight: (F, C, k, k), bias: (F,) or None.
    Output spatial size is floor((H + 2p - k) / s) + 1.
    """
    if not isinstance(stride, int) or stride < 1:
        raise NonPositiveStride(f"stride must be a positive int, got {stride!r}")
    xv, wv = x.value, weight.value
    if xv.ndim != 4 or wv.ndim != 4:
        raise ShapeMismatch(f"conv2d needs 4-D tensors, got {xv.shape} and {wv.shape}")
    n, c, h, w = xv.shape
    f, cin, kh, kw = wv.shape
    if cin != c:
        raise ShapeMismatch(f"input has {c} channels but kernel expects {cin}")
    if kh != kw:
        raise ShapeMismatch(f"only square kernels supported, got {kh}x{kw}")
    k, s, p = kh, stride, padding
    ho = (h + 2 * p - k) // s + 1
    wo = (w + 2 * p - k) // s + 1
    if ho < 1 or wo < 1:
        raise ShapeMismatch(f"kernel {k} too large for padded input {h + 2 * p}x{w + 2 * p}")

    if p > 0:
        xp = np.zeros((n, c, h + 2 * p, w + 2 * p), dtype=xv.dtype)
        xp[:, :, p : p + h, p : p + w] = xv
    else:
        xp = xv
    windows = np.lib.stride_tricks.sliding_window_view(xp, (k, k), axis=(2, 3))
    windows = windows[:, :, ::s, ::s]  # (N, C, Ho, Wo, k, k)
    cols = windows.transpose(0, 2, 3, 1, 4, 5).reshape(n * ho * wo, c * k * k)
    wmat = wv.reshape(f, c * k * k)
    out = (cols @ wmat.T).reshape(n, ho, wo, f).transpose(0, 3, 1, 2)
    if bias is not None:
        if bias.value.shape != (f,):
            raise ShapeMismatch(f"bias shape {bias.value.shape} != ({f},)")
        out = out + bias.value.reshape(1, f, 1, 1)

    parents = (x, weight) if bias is None else (x, weight, bias)

    def backward(g):
        gmat = g.transpose(0, 2, 3, 1).reshape(n * ho * wo, f)
        if weight.requires_grad:
            _accum(weight, (gmat.T @ cols).reshape(wv.shape))
        if bias is not None and bias.requires_grad:
            _accum(bias, g.sum(axis=(0, 2, 3)))
        if x.requires_grad:
            gcols = (gmat @ wmat).reshape(n, ho, wo, c, k, k).transpose(0, 3, 1, 2, 4, 5)
            gxp = np.zeros_like(xp)
            for i in range(k):
                for j in range(k):
                    gxp[:, :, i : i + s * ho : s, j : j + s * wo : s] += gcols[:, :, :, :, i, j]
            _accum(x, gxp[:, :, p : p + h, p : p + w] if p > 0 else gxp)

    return Node(out, parents, backward)


def _topo_order(root):
    """Reverse-topological node order, restricted to the grad-requiring
    subgraph. Iterative so deep cascades cannot hit the recursion limit."""
    order, visited = [], set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in visited or not node.requires_grad:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for parent in node.parents:
            stack.append((parent, False))
    return order


def backward(loss):
    """Populate .grad on every grad-requiring node reachable from ``loss``.

    Leaf gradients (nodes with no parents) accumulate across calls; zero
    them between optimizer steps. Interior nodes get fresh gradients.
    """
    if loss.value.ndim != 0:
        raise NonScalarLoss(f"loss must be a scalar, got shape {loss.value.shape}")
    if not loss.requires_grad:
        return
    order = _topo_order(loss)
    for node in order:
        if node.parents:
            node.grad = None
    seed = np.ones_like(loss.value)
    if loss.parents or loss.grad is None:
        loss.grad = seed
    else:
        loss.grad = loss.grad + seed
    for node in reversed(order):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)
