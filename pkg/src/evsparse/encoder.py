"""Deterministic patch-token encoder for merged event windows.

A window is rasterised into a two-channel count frame (ON counts, OFF
counts), cut into square patches, linearly projected, and run through a
small pre-norm transformer with a prepended summary (CLS) token.  All
weights are drawn once from a seeded generator at construction, so the
encoder is a fixed deterministic feature map: identical (frame, config)
pairs produce bit-identical token sequences.  It stands in for a trained
backbone; the pipeline only relies on its shape contract, determinism,
and sensitivity to the input.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .nn import gelu, layer_norm, sinusoidal_positions, softmax


@dataclass(frozen=True)
class EncoderConfig:
    patch_size: int = 16
    embed_dim: int = 64
    heads: int = 4
    layers: int = 2
    seed: int = 42

    def __post_init__(self):
        if self.patch_size < 1 or self.embed_dim < 1 or self.layers < 0:
            raise ValueError(f"invalid encoder config {self}")
        if self.heads < 1 or self.embed_dim % self.heads != 0:
            raise ValueError(
                f"heads must divide embed_dim, got {self.heads} and "
                f"{self.embed_dim}")


@dataclass
class TokenSequence:
    """Encoder output: one CLS summary vector, n patch tokens, and the
    pixel rectangle each token covers.

    ``patch_layout`` is an (n, 4) int array of half-open rectangles
    (x0, y0, x1, y1) tiling the padded frame in row-major token order.
    """

    cls: np.ndarray
    patches: np.ndarray
    patch_layout: np.ndarray

    @property
    def n_tokens(self):
        return self.patches.shape[0]


def config_fingerprint(config):
    """Stable hex digest of an EncoderConfig, for versioning snapshots."""
    canon = (f"patch={config.patch_size},dim={config.embed_dim},"
             f"heads={config.heads},layers={config.layers},"
             f"seed={config.seed}")
    return hashlib.sha256(canon.encode()).hexdigest()[:16]


def rasterize(window, width, height):
    """Per-pixel event counts of a window as a (2, height, width) array.

    Channel 0 counts ON (+1) events, channel 1 counts OFF (-1) events, so
    the total over both channels equals the window's event count.
    """
    ev = window.events
    frame = np.zeros((2, height, width), dtype=np.int64)
    if len(ev) == 0:
        return frame
    flat = ev["y"].astype(np.int64) * width + ev["x"].astype(np.int64)
    on = ev["p"] == 1
    frame[0] = np.bincount(flat[on], minlength=height * width) \
        .reshape(height, width)
    frame[1] = np.bincount(flat[~on], minlength=height * width) \
        .reshape(height, width)
    return frame


def patch_grid(width, height, patch_size):
    """(n, 4) half-open rectangles tiling the zero-padded frame,
    row-major over (row, col)."""
    ncols = -(-width // patch_size)
    nrows = -(-height // patch_size)
    rects = []
    for r in range(nrows):
        for c in range(ncols):
            rects.append((c * patch_size, r * patch_size,
                          (c + 1) * patch_size, (r + 1) * patch_size))
    return np.asarray(rects, dtype=np.int64)


class ToyEncoder:
    """Seeded random-weight patch transformer.

    Weights are drawn in a fixed order from ``default_rng(config.seed)``
    and never mutated afterwards, so instances are safely shareable across
    threads and calls are pure.
    """

    def __init__(self, config=EncoderConfig()):
        self.config = config
        d = config.embed_dim
        patch_dim = 2 * config.patch_size * config.patch_size
        rng = np.random.default_rng(config.seed)
        self.cls_token = rng.normal(0.0, 1.0 / np.sqrt(d), size=d)
        self.w_patch = rng.normal(0.0, 1.0 / np.sqrt(patch_dim),
                                  size=(patch_dim, d))
        self.blocks = []
        for _ in range(config.layers):
            blk = {
                "w_q": rng.normal(0.0, 1.0 / np.sqrt(d), size=(d, d)),
                "w_k": rng.normal(0.0, 1.0 / np.sqrt(d), size=(d, d)),
                "w_v": rng.normal(0.0, 1.0 / np.sqrt(d), size=(d, d)),
                "w_o": rng.normal(0.0, 1.0 / np.sqrt(d), size=(d, d)),
                "w_mlp1": rng.normal(0.0, 1.0 / np.sqrt(d), size=(d, 4 * d)),
                "w_mlp2": rng.normal(0.0, 1.0 / np.sqrt(4 * d),
                                     size=(4 * d, d)),
            }
            self.blocks.append(blk)

    def _patchify(self, frame):
        """Pad to patch multiples (bottom/right zeros) and flatten each
        patch to a (P*P*2) vector, channels last."""
        p = self.config.patch_size
        _, h, w = frame.shape
        hp, wp = -(-h // p) * p, -(-w // p) * p
        padded = np.zeros((2, hp, wp), dtype=np.float64)
        padded[:, :h, :w] = frame
        nrows, ncols = hp // p, wp // p
        # (2, nrows, p, ncols, p) -> (nrows, ncols, p, p, 2) -> (n, p*p*2)
        blocks = padded.reshape(2, nrows, p, ncols, p)
        blocks = blocks.transpose(1, 3, 2, 4, 0)
        return blocks.reshape(nrows * ncols, p * p * 2)

    def _self_attention(self, x, blk):
        d = self.config.embed_dim
        h = self.config.heads
        dk = d // h
        n = x.shape[0]
        q = (x @ blk["w_q"]).reshape(n, h, dk).transpose(1, 0, 2)
        k = (x @ blk["w_k"]).reshape(n, h, dk).transpose(1, 0, 2)
        v = (x @ blk["w_v"]).reshape(n, h, dk).transpose(1, 0, 2)
        logits = q @ k.transpose(0, 2, 1) / np.sqrt(dk)
        weights = softmax(logits, axis=-1)
        out = (weights @ v).transpose(1, 0, 2).reshape(n, d)
        return out @ blk["w_o"], weights

    def encode(self, frame, return_attention=False):
        """Encode a (2, H, W) count frame into a TokenSequence.

        Counts enter through log1p so arbitrarily hot pixels cannot blow
        up activations.  With ``return_attention`` the per-block softmax
        weights (heads, n+1, n+1) are returned as well.
        """
        layout = patch_grid(frame.shape[2], frame.shape[1],
                            self.config.patch_size)
        flat = np.log1p(self._patchify(frame))
        tokens = flat @ self.w_patch
        x = np.vstack([self.cls_token[None, :], tokens])
        x = x + sinusoidal_positions(x.shape[0], self.config.embed_dim)
        attentions = []
        for blk in self.blocks:
            a, w = self._self_attention(layer_norm(x), blk)
            x = x + a
            m = layer_norm(x)
            x = x + gelu(m @ blk["w_mlp1"]) @ blk["w_mlp2"]
            attentions.append(w)
        seq = TokenSequence(cls=x[0], patches=x[1:], patch_layout=layout)
        if return_attention:
            return seq, attentions
        return seq

    __call__ = encode


_ENCODER_CACHE: dict[EncoderConfig, ToyEncoder] = {}


def get_encoder(config=EncoderConfig()):
    """Shared per-config encoder instance (weights drawn once)."""
    enc = _ENCODER_CACHE.get(config)
    if enc is None:
        enc = ToyEncoder(config)
        _ENCODER_CACHE[config] = enc
    return enc


def encode(frame, config=EncoderConfig()):
    """Convenience wrapper: encode ``frame`` with the shared encoder."""
    return get_encoder(config).encode(frame)
