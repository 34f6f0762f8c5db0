"""Two-stage adaptive temporal window aggregation.

Stage 1 greedily merges adjacent bins whose intensity-field distance falls
below a threshold tau, producing meta windows of contiguous bin runs.
Stage 2 merges adjacent windows whose summary embeddings are similar,
attenuated by how event-dense the windows are: the adaptive score for a
pair is

    A = S * exp(-alpha * r)

with S the cosine similarity of the windows' summary embeddings and r the
left window's normalised event rate, so dense (information-rich) windows
resist being merged away while sparse or redundant spans collapse.

Both stages preserve event order and total event count, and every output
window covers a contiguous run of original bin indices.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict

import numpy as np

from .intensity import field_distance, intensity_field


@dataclass(frozen=True)
class MergeConfig:
    """Knobs for both merge stages.

    tau: stage-1 distance threshold (merge while distance < tau).
    alpha: density decay of the stage-2 score (0 disables density damping).
    score_threshold: stage-2 merge cutoff on the adaptive score.
    max_window_span: optional bound on a merged window's duration (us).
    target_windows: optional stage-2 stop once this few windows remain.
    """

    tau: float
    alpha: float = 0.1
    score_threshold: float = 0.85
    max_window_span: int | None = None
    target_windows: int | None = None

    def __post_init__(self):
        if self.tau <= 0:
            raise ValueError(f"tau must be positive, got {self.tau}")
        if self.alpha < 0:
            raise ValueError(f"alpha must be >= 0, got {self.alpha}")
        if not -1.0 <= self.score_threshold <= 1.0:
            raise ValueError(
                f"score_threshold must lie in [-1, 1], got "
                f"{self.score_threshold}")
        if self.max_window_span is not None and self.max_window_span <= 0:
            raise ValueError("max_window_span must be positive or None")
        if self.target_windows is not None and self.target_windows < 1:
            raise ValueError("target_windows must be >= 1 or None")


@dataclass
class MetaWindow:
    """A contiguous run of merged bins with its combined event payload."""

    first_bin: int
    last_bin: int
    t_start: int
    t_end: int
    events: np.ndarray
    source_count: int
    width: int = 0
    height: int = 0

    @property
    def duration(self):
        return self.t_end - self.t_start

    @property
    def event_count(self):
        return len(self.events)


@dataclass
class TraceRecord:
    """One merge decision: which pair was compared, the metric value, and
    whether the pair merged.  Stage 1 indexes bins; stage 2 indexes windows
    by their first_bin (stable across merge rounds)."""

    stage: int
    left_index: int
    right_index: int
    metric_value: float
    merged: bool

    def to_dict(self):
        return asdict(self)


def _window_from_bins(bins, first, last):
    run = bins[first:last + 1]
    events = np.concatenate([b.events for b in run])
    return MetaWindow(
        first_bin=run[0].index, last_bin=run[-1].index,
        t_start=run[0].t_start, t_end=run[-1].t_end,
        events=events, source_count=len(run),
        width=run[0].width, height=run[0].height)


def merge_stage1(bins, kernel, grid, config, trace=None):
    """Greedy left-to-right intensity-distance merging of adjacent bins.

    The open window absorbs the next bin iff the distance between the
    last absorbed bin and the candidate is below ``config.tau`` and the
    grown span stays within ``config.max_window_span``; otherwise a new
    window starts.  Each decision is appended to ``trace`` when given.
    """
    if not bins:
        return []
    for a, b in zip(bins, bins[1:]):
        if b.index != a.index + 1:
            raise ValueError(
                f"bins must be contiguous and ordered; got indices "
                f"{a.index} then {b.index}")

    fields = {}

    def field_of(i):
        if i not in fields:
            fields[i] = intensity_field(bins[i], kernel, grid)
        return fields[i]

    windows = []
    start = 0
    last = 0
    for j in range(1, len(bins)):
        d = field_distance(field_of(last), field_of(j))
        span_ok = (config.max_window_span is None
                   or bins[j].t_end - bins[start].t_start
                   <= config.max_window_span)
        merged = d < config.tau and span_ok
        if trace is not None:
            trace.append(TraceRecord(
                stage=1, left_index=bins[last].index,
                right_index=bins[j].index, metric_value=d, merged=merged))
        if merged:
            last = j
        else:
            windows.append(_window_from_bins(bins, start, last))
            start = j
            last = j
    windows.append(_window_from_bins(bins, start, last))
    return windows


def window_similarity(z_a, z_b):
    """Cosine similarity of two embedding vectors, in [-1, 1].

    Degenerate (near-zero-norm) embeddings compare as dissimilar: 0.
    """
    z_a = np.asarray(z_a, dtype=np.float64)
    z_b = np.asarray(z_b, dtype=np.float64)
    if z_a.shape != z_b.shape:
        raise ValueError(f"dimension mismatch: {z_a.shape} vs {z_b.shape}")
    na = np.linalg.norm(z_a)
    nb = np.linalg.norm(z_b)
    if na < 1e-12 or nb < 1e-12:
        return 0.0
    if np.array_equal(z_a, z_b):
        # identical embeddings are exactly maximally similar; the float
        # quotient can land a few ulp below 1 and miss a threshold of 1
        return 1.0
    return float(np.clip(np.dot(z_a, z_b) / (na * nb), -1.0, 1.0))


def density_factor(windows):
    """Batch-normalised event rates, one value in [0, 1] per window.

    raw_i is the window's events per microsecond; each raw rate is divided
    by the batch maximum, so the densest window gets 1 and empty windows
    get 0.  An all-empty batch maps to all zeros.
    """
    if not windows:
        raise ValueError("density_factor requires at least one window")
    raw = np.array(
        [w.event_count / w.duration for w in windows], dtype=np.float64)
    peak = raw.max()
    if peak == 0.0:
        return raw
    return raw / peak


def merging_score(similarity, density, alpha):
    """Adaptive merge score: similarity damped by event density,
    ``S * exp(-alpha * r)``.  Works elementwise on arrays."""
    return similarity * np.exp(-alpha * np.asarray(density, dtype=np.float64))


def _merge_pair(left, right):
    return MetaWindow(
        first_bin=left.first_bin, last_bin=right.last_bin,
        t_start=left.t_start, t_end=right.t_end,
        events=np.concatenate([left.events, right.events]),
        source_count=left.source_count + right.source_count,
        width=left.width, height=left.height)


def merge_stage2(windows, encode, config, trace=None):
    """Best-pair-first semantic merging of adjacent meta windows.

    Each round computes the adaptive score for every adjacent pair
    (cosine similarity of the windows' embeddings from ``encode``, damped
    by the left window's density factor) and merges the best-scoring pair
    if its score reaches ``config.score_threshold`` and the merged span
    stays within ``config.max_window_span``.  The merged window is
    re-encoded; scores touching it are recomputed.  Ties break toward the
    earlier pair.  Stops when no pair qualifies or the window count
    reaches ``config.target_windows``.
    """
    windows = list(windows)
    if len(windows) <= 1:
        return windows

    embeddings = [encode(w) for w in windows]
    sims = [window_similarity(embeddings[i], embeddings[i + 1])
            for i in range(len(windows) - 1)]

    while len(windows) > 1:
        if (config.target_windows is not None
                and len(windows) <= config.target_windows):
            break
        r = density_factor(windows)
        scores = merging_score(np.asarray(sims), r[:-1], config.alpha)
        if config.max_window_span is not None:
            spans = np.array([windows[i + 1].t_end - windows[i].t_start
                              for i in range(len(windows) - 1)])
            allowed = spans <= config.max_window_span
        else:
            allowed = np.ones(len(sims), dtype=bool)
        if not np.any(allowed):
            break
        masked = np.where(allowed, scores, -np.inf)
        best = int(np.argmax(masked))  # argmax takes the earliest tie
        best_score = float(masked[best])
        left_id = windows[best].first_bin
        right_id = windows[best + 1].first_bin
        if best_score < config.score_threshold:
            if trace is not None:
                trace.append(TraceRecord(
                    stage=2, left_index=left_id, right_index=right_id,
                    metric_value=best_score, merged=False))
            break
        if trace is not None:
            trace.append(TraceRecord(
                stage=2, left_index=left_id, right_index=right_id,
                metric_value=best_score, merged=True))
        merged = _merge_pair(windows[best], windows[best + 1])
        windows[best:best + 2] = [merged]
        embeddings[best:best + 2] = [encode(merged)]
        del sims[best:min(best + 2, len(sims))]
        if best - 1 >= 0:
            sims[best - 1] = window_similarity(
                embeddings[best - 1], embeddings[best])
        if best < len(windows) - 1:
            sims.insert(best, window_similarity(
                embeddings[best], embeddings[best + 1]))
    return windows
