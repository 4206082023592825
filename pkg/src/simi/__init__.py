"""Self-information-mining low-light image enhancement.

Unsupervised enhancement built on bit-plane decomposition, attention
gating, a cascade of curve-estimation blocks, and zero-reference
losses, with a from-scratch reverse-mode autodiff engine underneath.
"""

__version__ = "0.1.0"
