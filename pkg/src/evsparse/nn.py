"""Small shared neural-net numerics: one GELU, one softmax, one layer norm.

Both the window encoder and the density-guided attention import these, so
every activation and normalisation in the pipeline has a single numeric
definition.
"""

from __future__ import annotations

import numpy as np
from scipy.special import erf

_SQRT2 = np.sqrt(2.0)


def gelu(u):
    """Exact-erf GELU: 0.5 * u * (1 + erf(u / sqrt(2)))."""
    u = np.asarray(u, dtype=np.float64)
    return 0.5 * u * (1.0 + erf(u / _SQRT2))


def softmax(logits, axis=-1):
    """Numerically stable softmax along ``axis``; rows sum to 1."""
    z = logits - np.max(logits, axis=axis, keepdims=True)
    e = np.exp(z)
    return e / np.sum(e, axis=axis, keepdims=True)


def layer_norm(x, eps=1e-6):
    """Zero-mean unit-variance normalisation over the last axis (no affine)."""
    mu = np.mean(x, axis=-1, keepdims=True)
    var = np.var(x, axis=-1, keepdims=True)
    return (x - mu) / np.sqrt(var + eps)


def sinusoidal_positions(n, dim):
    """Classic fixed sin/cos position table of shape (n, dim)."""
    pos = np.arange(n, dtype=np.float64)[:, None]
    i = np.arange(dim, dtype=np.float64)[None, :]
    angle = pos / np.power(10000.0, 2.0 * (i // 2) / dim)
    table = np.empty((n, dim))
    table[:, 0::2] = np.sin(angle[:, 0::2])
    table[:, 1::2] = np.cos(angle[:, 1::2])
    return table
