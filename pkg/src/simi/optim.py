"""Named parameter store and the AdamW optimizer (decoupled weight decay)."""

import numpy as np

from .autodiff import Node
from .errors import MissingGradient

ADAM_BETAS = (0.9, 0.999)
ADAM_EPS = 1e-8


class ParamStore:
    """Ordered map name -> parameter Node, plus per-parameter Adam moments.

    Insertion order is part of the checkpoint contract; parameters are
    serialized and restored in the order they were added.
    """

    def __init__(self, dtype=np.float32):
        self.dtype = np.dtype(dtype)
        self._params = {}
        self.moment1 = {}
        self.moment2 = {}
        self.step_count = 0

    def add(self, name, value):
        if name in self._params:
            raise ValueError(f"duplicate parameter name {name!r}")
        node = Node(np.asarray(value, dtype=self.dtype), requires_grad=True)
        self._params[name] = node
        self.moment1[name] = np.zeros_like(node.value)
        self.moment2[name] = np.zeros_like(node.value)
        return node

    def __getitem__(self, name):
        return self._params[name]

    def __contains__(self, name):
        return name in self._params

    def __iter__(self):
        return iter(self._params)

    def names(self):
        return list(self._params)

    def items(self):
        return self._params.items()

    def zero_grad(self):
        for node in self._params.values():
            node.grad = None

    def param_count(self):
        return sum(node.value.size for node in self._params.values())


def kaiming_uniform(rng, shape, fan_in, dtype=np.float32):
    """He-uniform draw: U(-b, b) with b = sqrt(6 / fan_in).

    Sampled in float64 and cast, so a given seed yields the same weights
    (up to rounding) in either precision.
    """
    bound = np.sqrt(6.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape).astype(dtype)


def adamw_step(store, lr, betas=ADAM_BETAS, eps=ADAM_EPS, weight_decay=0.0):
    """One AdamW update over every parameter in the store.

    theta <- theta - lr * m_hat / (sqrt(v_hat) + eps) - lr * wd * theta,
    with bias-corrected moments. Weight decay is decoupled from the
    gradient path.
    """
    beta1, beta2 = betas
    store.step_count += 1
    t = store.step_count
    bc1 = 1.0 - beta1 ** t
    bc2 = 1.0 - beta2 ** t
    for name, node in store.items():
        if node.grad is None:
            raise MissingGradient(f"parameter {name!r} has no gradient")
        g = node.grad
        m = store.moment1[name]
        v = store.moment2[name]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * (g * g)
        update = (m / bc1) / (np.sqrt(v / bc2) + eps)
        if weight_decay != 0.0:
            node.value -= lr * weight_decay * node.value
        node.value -= lr * update
