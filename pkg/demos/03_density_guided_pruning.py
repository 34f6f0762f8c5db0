"""Density-guided spatial token pruning on a single window.

A window with events concentrated in one corner is rasterised and
encoded into patch tokens; the per-token event density modulates the
attention logits, and the selector keeps only the tokens that received
the most attention mass.  Empty regions are pruned away.
"""

import numpy as np

from evsparse import (AttentionConfig, DensityEncoder, EncoderConfig,
                      ModulatedAttention, SyntheticSpec, ToyEncoder,
                      density_encode, generate_synthetic, rasterize, sdga,
                      segment_into_bins, token_density)

W = H = 64

# a dot sweeping the diagonal leaves most patches empty; pruning should
# concentrate on the patches the trajectory actually crossed
stream = generate_synthetic(SyntheticSpec(
    kind="moving_dot", duration_us=40_000, width=W, height=H,
    rate=30_000.0, seed=13))
window = segment_into_bins(stream, 40_000)[0]
print(f"window with {len(window)} events")

frame = rasterize(window, W, H)
print(f"rasterised to {frame.shape} counts "
      f"(ON {frame[0].sum()}, OFF {frame[1].sum()})")

encoder = ToyEncoder(EncoderConfig())
tokens = encoder.encode(frame)
n = tokens.n_tokens
print(f"encoder: {n} patch tokens of dim {tokens.patches.shape[1]} "
      f"plus one summary token")

# --- per-token densities and their GELU-encoded modulation ----------------

density = token_density(window, tokens.patch_layout)
enc = DensityEncoder(weight=1.0, bias=0.0)
modulation = density_encode(density, enc)

side = int(np.sqrt(n))
print("\nevent counts per patch:")
for r in range(side):
    print("  " + " ".join(f"{c:4d}"
                          for c in density.raw[r * side:(r + 1) * side]))
print("modulation added to each key's attention logits:")
for r in range(side):
    print("  " + " ".join(f"{m:4.2f}"
                          for m in modulation[r * side:(r + 1) * side]))

# --- the full pruning pass -------------------------------------------------

attention = ModulatedAttention(AttentionConfig(embed_dim=64, heads=4))
result = sdga(window, tokens, enc, rho=0.25, attention=attention)
print(f"\nkeep ratio 0.25 -> kept {len(result.kept_indices)} of {n} tokens: "
      f"{result.kept_indices.tolist()}")

kept = set(result.kept_indices.tolist())
print("kept patch map (X = kept, . = pruned):")
for r in range(side):
    row = "".join("X" if r * side + c in kept else "."
                  for c in range(side))
    print("   " + row)

ranked = np.argsort(-result.importance)
print("\ntoken importance (attention mass received), top five:")
for j in ranked[:5]:
    print(f"  token {j:2d}: importance {result.importance[j]:.3f}, "
          f"{density.raw[j]} events in its patch")
