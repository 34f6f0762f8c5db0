"""Gaussian-kernel intensity fields over event bins and the bin distance.

A bin is treated as a polarity-weighted spatiotemporal point process: each
event contributes a separable Gaussian bump, signed by its polarity,

    lam(x, y, t) = sum_n p_n * exp(-(x-x_n)^2 / 2 sx^2
                                   -(y-y_n)^2 / 2 sy^2
                                   -(t-t_n)^2 / 2 st^2).

The continuous field is sampled on an axis-uniform grid: cell centres over
[0, width) x [0, height) spatially, and over [0, duration) temporally with
event times taken relative to the bin's own start.  The re-origined time
axis makes two bins with identical relative event sets sample to identical
fields, so purely translated content has distance zero.

The distance between two bins is the plain L2 norm of the difference of
their sampled fields.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class KernelParams:
    """Gaussian kernel bandwidths: sigma_x/sigma_y in pixels, sigma_t in
    microseconds.  ``truncate_sigmas`` optionally skips events farther than
    that many bandwidths from a sample point along any axis (None = exact
    evaluation; see intensity_field for the accuracy trade)."""

    sigma_x: float
    sigma_y: float
    sigma_t: float
    truncate_sigmas: float | None = None

    def __post_init__(self):
        if self.sigma_x <= 0 or self.sigma_y <= 0 or self.sigma_t <= 0:
            raise ValueError(
                f"kernel bandwidths must be positive, got "
                f"({self.sigma_x}, {self.sigma_y}, {self.sigma_t})")
        if self.truncate_sigmas is not None and self.truncate_sigmas <= 0:
            raise ValueError("truncate_sigmas must be positive or None")


@dataclass(frozen=True)
class GridSpec:
    """Sample counts per axis for discretising the intensity field."""

    nx: int = 16
    ny: int = 16
    nt: int = 8

    def __post_init__(self):
        if self.nx < 1 or self.ny < 1 or self.nt < 1:
            raise ValueError(f"grid counts must be >= 1, got {self}")

    def sample_axes(self, width, height, duration):
        """Cell-centre sample coordinates: x over [0, width), y over
        [0, height), t over [0, duration) relative to the bin start."""
        xs = (np.arange(self.nx) + 0.5) * (width / self.nx)
        ys = (np.arange(self.ny) + 0.5) * (height / self.ny)
        ts = (np.arange(self.nt) + 0.5) * (duration / self.nt)
        return xs, ys, ts


@dataclass
class IntensityField:
    """A sampled intensity field: values[i, j, k] at (x_i, y_j, t_k)."""

    values: np.ndarray
    grid: GridSpec


def _gauss_1d(samples, centers, sigma, truncate):
    """(n_events, n_samples) Gaussian factors, optionally truncated."""
    z = (samples[None, :] - centers[:, None]) / sigma
    g = np.exp(-0.5 * z * z)
    if truncate is not None:
        g[np.abs(z) > truncate] = 0.0
    return g


def intensity_at(bin, kernel, point):
    """Evaluate the bin's intensity at one absolute (x, y, t) point.

    Polarity enters as a signed weight, so ON and OFF populations cancel
    rather than stack.  An empty bin evaluates to 0.
    """
    ev = bin.events
    if len(ev) == 0:
        return 0.0
    x, y, t = point
    zx = (x - ev["x"].astype(np.float64)) / kernel.sigma_x
    zy = (y - ev["y"].astype(np.float64)) / kernel.sigma_y
    zt = (t - ev["t"].astype(np.float64)) / kernel.sigma_t
    q = 0.5 * (zx * zx + zy * zy + zt * zt)
    terms = ev["p"].astype(np.float64) * np.exp(-q)
    if kernel.truncate_sigmas is not None:
        c = kernel.truncate_sigmas
        terms[(np.abs(zx) > c) | (np.abs(zy) > c) | (np.abs(zt) > c)] = 0.0
    return float(np.sum(terms))


def intensity_field(bin, kernel, grid, width=None, height=None):
    """Sample the bin's intensity on ``grid``.

    The spatial extent comes from the bin's sensor geometry (or explicit
    ``width``/``height``); the temporal extent is the bin's own duration
    with event times re-origined to t_start.  Deterministic for fixed
    inputs: the summation order over events is fixed per sample point.

    With ``kernel.truncate_sigmas`` set, per-event factors beyond the
    cutoff are zeroed; the result then deviates from the exact field by at
    most ``n_events * exp(-truncate_sigmas^2 / 2)`` per sample.
    """
    w = width if width is not None else bin.width
    h = height if height is not None else bin.height
    if w <= 0 or h <= 0:
        raise ValueError("bin carries no sensor geometry; pass width/height")
    xs, ys, ts = grid.sample_axes(w, h, bin.duration)
    ev = bin.events
    if len(ev) == 0:
        return IntensityField(np.zeros((grid.nx, grid.ny, grid.nt)), grid)
    c = kernel.truncate_sigmas
    gx = _gauss_1d(xs, ev["x"].astype(np.float64), kernel.sigma_x, c)
    gy = _gauss_1d(ys, ev["y"].astype(np.float64), kernel.sigma_y, c)
    gt = _gauss_1d(ts, (ev["t"] - bin.t_start).astype(np.float64),
                   kernel.sigma_t, c)
    sgx = ev["p"].astype(np.float64)[:, None] * gx
    # Contract over events as one fixed-shape matmul: the reduction order
    # depends only on the operand shapes, never on EVSPARSE_THREADS, so
    # repeated runs stay bit-identical.
    sxy = (sgx[:, :, None] * gy[:, None, :]).reshape(len(ev), -1)
    values = (sxy.T @ gt).reshape(grid.nx, grid.ny, grid.nt)
    return IntensityField(values, grid)


def field_distance(field_a, field_b):
    """L2 norm of the elementwise difference of two sampled fields."""
    if field_a.grid != field_b.grid:
        raise ValueError(
            f"mismatched grids: {field_a.grid} vs {field_b.grid}")
    diff = field_a.values - field_b.values
    return float(np.sqrt(np.sum(diff * diff)))


def bin_distance(bin_a, bin_b, kernel, grid):
    """Distance between two bins: L2 norm of the difference of their
    sampled intensity fields (each re-origined to its own start).

    Symmetric and non-negative; zero for bins whose relative event sets
    are identical.  Both bins must share geometry and duration so the
    sample lattices coincide.
    """
    wa, ha = bin_a.width, bin_a.height
    wb, hb = bin_b.width, bin_b.height
    if (wa, ha) != (wb, hb):
        raise ValueError(f"geometry mismatch: {wa}x{ha} vs {wb}x{hb}")
    if bin_a.duration != bin_b.duration:
        raise ValueError(
            f"duration mismatch: {bin_a.duration} vs {bin_b.duration}")
    fa = intensity_field(bin_a, kernel, grid)
    fb = intensity_field(bin_b, kernel, grid)
    return field_distance(fa, fb)
