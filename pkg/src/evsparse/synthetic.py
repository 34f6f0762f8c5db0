"""Deterministic synthetic event-stream generators for benchmarks and tests.

Every generator is a pure function of its spec: the same (kind, geometry,
duration, rate, seed) always produces a bit-identical stream.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .events import EventStream

KINDS = ("static_scene", "moving_dot", "burst", "poisson_noise", "two_phase")


@dataclass(frozen=True)
class SyntheticSpec:
    """What to generate.

    kind: one of KINDS.
    duration_us: stream length in microseconds.
    width/height: sensor geometry.
    rate: target mean event rate in events/second (kind-specific default
        when None).
    period_us: repetition period of the static pattern; aligning it with
        the downstream bin duration makes every bin's relative event set
        identical.
    seed: generator seed.
    """

    kind: str
    duration_us: int
    width: int = 128
    height: int = 128
    rate: float | None = None
    period_us: int = 10_000
    seed: int = 7

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown kind {self.kind!r}; expected {KINDS}")
        if self.duration_us <= 0 or self.width <= 0 or self.height <= 0:
            raise ValueError(f"invalid spec {self}")
        if self.period_us <= 0:
            raise ValueError("period_us must be positive")


def generate_synthetic(spec):
    """Build the stream described by ``spec``; see SyntheticSpec."""
    rng = np.random.default_rng(spec.seed)
    if spec.kind == "static_scene":
        cols = _static_scene(spec, rng, 0, spec.duration_us)
    elif spec.kind == "moving_dot":
        cols = _moving_dot(spec, rng, 0, spec.duration_us)
    elif spec.kind == "burst":
        cols = _burst(spec, rng)
    elif spec.kind == "poisson_noise":
        cols = _poisson_noise(spec, rng)
    else:  # two_phase
        half = spec.duration_us // 2
        static = _static_scene(spec, rng, 0, half)
        moving = _moving_dot(spec, rng, half, spec.duration_us,
                             rate=(spec.rate or 15_000.0) / 4)
        cols = tuple(np.concatenate([a, b]) for a, b in zip(static, moving))
    t, x, y, p = cols
    return EventStream.from_arrays(spec.width, spec.height, t, x, y, p)


def _static_scene(spec, rng, t_begin, t_end, rate=None):
    """A fixed spatial pattern re-emitted every period with identical
    within-period offsets, for as many whole periods as fit."""
    rate = rate if rate is not None else (spec.rate or 15_000.0)
    per_period = max(1, round(rate * spec.period_us / 1e6))
    n_periods = max(1, (t_end - t_begin) // spec.period_us)
    px = rng.integers(0, spec.width, size=per_period)
    py = rng.integers(0, spec.height, size=per_period)
    pol = rng.choice(np.array([1, -1], dtype=np.int64), size=per_period)
    offsets = np.sort(rng.integers(0, spec.period_us, size=per_period))
    # Anchor the pattern at the period start so bins cut at period
    # boundaries see exactly one whole pattern each.
    offsets[0] = 0
    starts = t_begin + spec.period_us * np.arange(n_periods, dtype=np.int64)
    t = (starts[:, None] + offsets[None, :]).ravel()
    x = np.tile(px, n_periods)
    y = np.tile(py, n_periods)
    p = np.tile(pol, n_periods)
    return t, x, y, p


def _moving_dot(spec, rng, t_begin, t_end, rate=None):
    """A small event cloud following a constant-velocity trajectory."""
    rate = rate if rate is not None else (spec.rate or 15_000.0)
    duration = t_end - t_begin
    n = max(1, round(rate * duration / 1e6))
    t = np.sort(rng.integers(t_begin, t_end, size=n))
    frac = (t - t_begin) / duration
    margin = 4
    x0, y0 = margin, margin
    x1, y1 = spec.width - 1 - margin, spec.height - 1 - margin
    cx = x0 + frac * (x1 - x0)
    cy = y0 + frac * (y1 - y0)
    x = np.clip(np.round(cx + rng.normal(0, 1.5, size=n)), 0,
                spec.width - 1).astype(np.int64)
    y = np.clip(np.round(cy + rng.normal(0, 1.5, size=n)), 0,
                spec.height - 1).astype(np.int64)
    p = rng.choice(np.array([1, -1], dtype=np.int64), size=n)
    return t, x, y, p


def _burst(spec, rng):
    """Sparse background with a dense burst in the middle tenth."""
    base_rate = spec.rate or 2_000.0
    n_bg = max(1, round(base_rate * spec.duration_us / 1e6))
    burst_lo = int(spec.duration_us * 0.45)
    burst_hi = int(spec.duration_us * 0.55)
    n_burst = n_bg * 20
    t = np.concatenate([
        rng.integers(0, spec.duration_us, size=n_bg),
        rng.integers(burst_lo, burst_hi, size=n_burst),
    ])
    order = np.argsort(t, kind="stable")
    n = len(t)
    x = rng.integers(0, spec.width, size=n)
    y = rng.integers(0, spec.height, size=n)
    p = rng.choice(np.array([1, -1], dtype=np.int64), size=n)
    return t[order], x[order], y[order], p[order]


def _poisson_noise(spec, rng):
    """Homogeneous Poisson noise, uniform over pixels and polarity."""
    rate = spec.rate or 10_000.0
    n = int(rng.poisson(rate * spec.duration_us / 1e6))
    n = max(n, 1)
    t = np.sort(rng.integers(0, spec.duration_us, size=n))
    x = rng.integers(0, spec.width, size=n)
    y = rng.integers(0, spec.height, size=n)
    p = rng.choice(np.array([1, -1], dtype=np.int64), size=n)
    return t, x, y, p
