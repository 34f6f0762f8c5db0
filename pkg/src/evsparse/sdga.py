"""Sparse density-guided attention and token selection.

Patch tokens from the encoder are re-weighted by where the events actually
happened: each token's receptive-field event count is normalised, passed
through a scalar linear-plus-GELU map, and added to the attention logits
along the key axis.  Tokens sitting on dense regions therefore receive
more attention mass; the selector then keeps the top fraction rho of
tokens by total received attention and drops the rest.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .nn import gelu, softmax


@dataclass
class DensityMap:
    """Per-token event densities: raw receptive-field counts and the
    max-normalised values actually fed to the density encoder."""

    raw: np.ndarray
    normalized: np.ndarray


@dataclass(frozen=True)
class DensityEncoder:
    """Scalar linear map followed by GELU: f(D) = GELU(weight * D + bias).

    The default identity-ish parameters keep the modulation oriented so
    denser tokens score higher; ``from_seed`` draws randomised but
    positively-oriented parameters.
    """

    weight: float = 1.0
    bias: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.weight) and math.isfinite(self.bias)):
            raise ValueError("density encoder parameters must be finite")

    @classmethod
    def from_seed(cls, seed):
        rng = np.random.default_rng(seed)
        return cls(weight=float(rng.uniform(0.5, 2.0)),
                   bias=float(rng.normal(0.0, 0.25)))


@dataclass(frozen=True)
class AttentionConfig:
    embed_dim: int = 64
    heads: int = 4
    seed: int = 7

    def __post_init__(self):
        if self.heads < 1 or self.embed_dim % self.heads != 0:
            raise ValueError(
                f"heads must divide embed_dim, got {self.heads} and "
                f"{self.embed_dim}")


@dataclass
class SelectionResult:
    """Pruning outcome: kept token indices (strictly increasing), their
    attended output vectors, and the full importance vector."""

    kept_indices: np.ndarray
    outputs: np.ndarray
    importance: np.ndarray


def token_density(window, patch_layout):
    """Count window events inside each token's pixel rectangle.

    ``patch_layout`` must be a product grid of half-open rectangles tiling
    the (padded) frame, as produced by the encoder.  Raw counts sum to the
    window's event count; normalisation divides by the peak count and
    leaves an all-empty map at zero.
    """
    layout = np.asarray(patch_layout)
    n = layout.shape[0]
    x_edges = np.unique(layout[:, 2])
    y_edges = np.unique(layout[:, 3])
    lookup = np.full((len(y_edges), len(x_edges)), -1, dtype=np.int64)
    col_of = {x0: i for i, x0 in enumerate(np.unique(layout[:, 0]))}
    row_of = {y0: i for i, y0 in enumerate(np.unique(layout[:, 1]))}
    for k, (x0, y0, _, _) in enumerate(layout):
        lookup[row_of[int(y0)], col_of[int(x0)]] = k
    if np.any(lookup < 0):
        raise ValueError("patch_layout is not a product-grid tiling")

    ev = window.events
    raw = np.zeros(n, dtype=np.int64)
    if len(ev):
        cols = np.searchsorted(x_edges, ev["x"], side="right")
        rows = np.searchsorted(y_edges, ev["y"], side="right")
        if cols.max() >= len(x_edges) or rows.max() >= len(y_edges):
            raise ValueError("events fall outside the patch layout")
        raw = np.bincount(lookup[rows, cols], minlength=n)
    peak = raw.max() if n else 0
    normalized = raw / peak if peak > 0 else np.zeros(n, dtype=np.float64)
    return DensityMap(raw=raw, normalized=np.asarray(normalized, float))


def density_encode(density, enc):
    """Map normalised densities to modulation logits, GELU(w*D + b)."""
    d = np.asarray(
        density.normalized if isinstance(density, DensityMap) else density,
        dtype=np.float64)
    return gelu(enc.weight * d + enc.bias)


class ModulatedAttention:
    """Single multi-head self-attention layer whose logits are shifted by
    a per-key modulation vector.

    Projection weights are drawn once from a seeded generator; instances
    are immutable in normal use (tests may overwrite the arrays to build
    degenerate cases).
    """

    def __init__(self, config=AttentionConfig()):
        self.config = config
        d = config.embed_dim
        rng = np.random.default_rng(config.seed)
        self.w_q = rng.normal(0.0, 1.0 / np.sqrt(d), size=(d, d))
        self.w_k = rng.normal(0.0, 1.0 / np.sqrt(d), size=(d, d))
        self.w_v = rng.normal(0.0, 1.0 / np.sqrt(d), size=(d, d))
        self.w_o = rng.normal(0.0, 1.0 / np.sqrt(d), size=(d, d))

    def __call__(self, tokens, modulation):
        """Attend over (n, d) tokens with per-key logit shifts.

        Per head: logits_ij = Q_i . K_j / sqrt(d_k) + f_j, broadcast over
        queries and heads; rows are softmaxed, outputs are the attended
        values concatenated over heads and output-projected.  Returns
        (outputs (n, d), head-averaged weights (n, n)).
        """
        x = np.asarray(tokens, dtype=np.float64)
        f = np.asarray(modulation, dtype=np.float64)
        n, d = x.shape
        if d != self.config.embed_dim:
            raise ValueError(
                f"token dim {d} != configured {self.config.embed_dim}")
        if f.shape != (n,):
            raise ValueError(f"modulation must be shape ({n},), got {f.shape}")
        h = self.config.heads
        dk = d // h
        q = (x @ self.w_q).reshape(n, h, dk).transpose(1, 0, 2)
        k = (x @ self.w_k).reshape(n, h, dk).transpose(1, 0, 2)
        v = (x @ self.w_v).reshape(n, h, dk).transpose(1, 0, 2)
        logits = q @ k.transpose(0, 2, 1) / np.sqrt(dk) + f[None, None, :]
        weights = softmax(logits, axis=-1)
        out = (weights @ v).transpose(1, 0, 2).reshape(n, d) @ self.w_o
        return out, weights.mean(axis=0)


def modulated_attention(tokens, modulation, attention):
    """Functional form of ModulatedAttention.__call__."""
    return attention(tokens, modulation)


def keep_count(n, rho):
    """ceil(rho * n), computed so exact products are not pushed up by
    float error (0.1 * 20 must keep 2 tokens, not 3)."""
    return min(n, max(1, math.ceil(rho * n - 1e-9)))


def token_selector(outputs, weights, rho):
    """Keep the top ceil(rho*n) tokens by total received attention.

    importance_j is the column mass sum_i weights_ij of the head-averaged
    attention matrix.  Ties break toward the lower token index; kept
    indices are returned in increasing order with their output vectors.
    """
    if not 0.0 < rho <= 1.0:
        raise ValueError(f"rho must lie in (0, 1], got {rho}")
    outputs = np.asarray(outputs)
    weights = np.asarray(weights)
    n = outputs.shape[0]
    importance = weights.sum(axis=0)
    k = keep_count(n, rho)
    ranked = np.argsort(-importance, kind="stable")
    kept = np.sort(ranked[:k])
    return SelectionResult(
        kept_indices=kept, outputs=outputs[kept], importance=importance)


def sdga(window, tokens, enc, rho, attention=None, return_debug=False):
    """Full density-guided pruning of one window's patch tokens.

    Composes token_density -> density_encode -> modulated attention ->
    token_selector.  ``attention`` defaults to a seeded ModulatedAttention
    sized to the token dimension.  With ``return_debug`` a JSON-friendly
    record of the intermediate vectors is returned alongside the result.
    """
    if attention is None:
        attention = ModulatedAttention(
            AttentionConfig(embed_dim=tokens.patches.shape[1]))
    density = token_density(window, tokens.patch_layout)
    f = density_encode(density, enc)
    outputs, weights = attention(tokens.patches, f)
    result = token_selector(outputs, weights, rho)
    if return_debug:
        debug = {
            "density_raw": density.raw.tolist(),
            "density_normalized": density.normalized.tolist(),
            "modulation": f.tolist(),
            "importance": result.importance.tolist(),
            "kept_indices": result.kept_indices.tolist(),
        }
        return result, debug
    return result
