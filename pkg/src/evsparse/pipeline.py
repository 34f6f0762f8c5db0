"""End-to-end pipeline: bin, merge, encode, prune, and report.

The pipeline turns a raw event stream into a short sequence of kept patch
tokens per merged window and an efficiency report with per-stage wall
times and reduction ratios.  Either sparsification stage can be toggled
off independently, which is what the ablation runner sweeps over.
"""

from __future__ import annotations

import csv as _csv
import json
import os
import time
import tracemalloc
from dataclasses import dataclass, field, replace

import numpy as np

from .encoder import EncoderConfig, ToyEncoder, rasterize
from .events import EventStream, segment_into_bins
from .intensity import GridSpec, KernelParams, bin_distance
from .sdga import AttentionConfig, DensityEncoder, ModulatedAttention, sdga
from .synthetic import SyntheticSpec, generate_synthetic
from .temporal import (MergeConfig, MetaWindow, merge_stage1, merge_stage2)


def thread_count(default=1):
    """Worker count for per-window work; EVSPARSE_THREADS caps/overrides."""
    raw = os.environ.get("EVSPARSE_THREADS")
    if raw is None:
        return default
    try:
        return max(1, int(raw))
    except ValueError:
        return default


@dataclass(frozen=True)
class PipelineConfig:
    """Everything the pipeline needs; defaults follow the library-wide
    choices (10 ms bins, 2 px spatial and quarter-bin temporal bandwidth,
    16x16x8 field grid, alpha 0.1, keep ratio 0.25)."""

    bin_duration_us: int = 10_000
    kernel: KernelParams | None = None  # None: sigma_x=sigma_y=2, sigma_t=bin/4
    grid: GridSpec = field(default_factory=GridSpec)
    merge: MergeConfig = field(default_factory=lambda: MergeConfig(tau=1.0))
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    density: DensityEncoder = field(default_factory=DensityEncoder)
    attention_seed: int = 7
    rho: float = 0.25
    temporal_on: bool = True
    spatial_on: bool = True

    def resolved_kernel(self):
        if self.kernel is not None:
            return self.kernel
        return KernelParams(sigma_x=2.0, sigma_y=2.0,
                            sigma_t=self.bin_duration_us / 4.0)


@dataclass
class EfficiencyReport:
    """Counts, reduction ratios, and wall times for one pipeline run.

    ``tokens_in`` counts patch tokens entering the spatial stage (windows
    times patches per window); ``tokens_out`` counts emitted tokens.
    ``tokens_per_second`` is the pipeline emission rate, not a language
    model's decode rate.
    """

    events_in: int
    bins_in: int
    windows_out: int
    tokens_in: int
    tokens_out: int
    temporal_reduction: float
    spatial_reduction: float
    timings_ms: dict
    tokens_per_second: float

    def to_dict(self):
        return {
            "events_in": self.events_in,
            "bins_in": self.bins_in,
            "windows_out": self.windows_out,
            "tokens_in": self.tokens_in,
            "tokens_out": self.tokens_out,
            "temporal_reduction": self.temporal_reduction,
            "spatial_reduction": self.spatial_reduction,
            "timings_ms": dict(self.timings_ms),
            "tokens_per_second": self.tokens_per_second,
        }


@dataclass
class WindowTokens:
    """Kept tokens of one output window."""

    window_id: int
    t_start: int
    t_end: int
    kept_indices: np.ndarray
    vectors: np.ndarray
    debug: dict | None = None

    def to_dict(self, include_vectors=True):
        rec = {
            "window_id": self.window_id,
            "t_start": self.t_start,
            "t_end": self.t_end,
            "kept_indices": self.kept_indices.tolist(),
        }
        if include_vectors:
            rec["vectors"] = self.vectors.tolist()
        return rec


@dataclass
class PipelineResult:
    windows: list
    report: EfficiencyReport
    trace: list


def _bin_to_window(b):
    return MetaWindow(
        first_bin=b.index, last_bin=b.index, t_start=b.t_start,
        t_end=b.t_end, events=b.events, source_count=1,
        width=b.width, height=b.height)


def run_pipeline(stream, config, threads=None, collect_debug=False):
    """Run the full sparsification pipeline over one stream.

    Stages: segment into bins; if temporal is on, distance-merge bins into
    meta windows and then semantically merge windows; encode each final
    window; if spatial is on, density-prune its patch tokens.  With both
    stages off the output is one window per bin carrying every patch
    token, so both reduction ratios are exactly 1.

    Per-window encoding/pruning may run on ``threads`` workers (default
    from EVSPARSE_THREADS); results are assembled by window index and do
    not depend on the worker count.
    """
    if len(stream) and (stream.events["x"].max() >= stream.width
                        or stream.events["y"].max() >= stream.height):
        raise ValueError("stream events exceed declared geometry")
    threads = threads if threads is not None else thread_count()
    kernel = config.resolved_kernel()
    enc = ToyEncoder(config.encoder)
    attention = ModulatedAttention(AttentionConfig(
        embed_dim=config.encoder.embed_dim, heads=config.encoder.heads,
        seed=config.attention_seed))
    trace = []
    timings = {}

    t0 = time.perf_counter()
    bins = segment_into_bins(stream, config.bin_duration_us)
    timings["segment"] = (time.perf_counter() - t0) * 1e3

    if config.temporal_on:
        t0 = time.perf_counter()
        windows = merge_stage1(bins, kernel, config.grid, config.merge,
                               trace=trace)
        timings["stage1"] = (time.perf_counter() - t0) * 1e3

        t0 = time.perf_counter()
        embed = lambda w: enc.encode(
            rasterize(w, stream.width, stream.height)).cls
        windows = merge_stage2(windows, embed, config.merge, trace=trace)
        timings["stage2"] = (time.perf_counter() - t0) * 1e3
    else:
        windows = [_bin_to_window(b) for b in bins]
        timings["stage1"] = 0.0
        timings["stage2"] = 0.0

    def process(item):
        idx, w = item
        frame = rasterize(w, stream.width, stream.height)
        tokens = enc.encode(frame)
        if config.spatial_on:
            if collect_debug:
                sel, dbg = sdga(w, tokens, config.density, config.rho,
                                attention=attention, return_debug=True)
            else:
                sel = sdga(w, tokens, config.density, config.rho,
                           attention=attention)
                dbg = None
            return WindowTokens(
                window_id=idx, t_start=w.t_start, t_end=w.t_end,
                kept_indices=sel.kept_indices, vectors=sel.outputs,
                debug=dbg)
        n = tokens.n_tokens
        return WindowTokens(
            window_id=idx, t_start=w.t_start, t_end=w.t_end,
            kept_indices=np.arange(n), vectors=tokens.patches)

    t0 = time.perf_counter()
    items = list(enumerate(windows))
    if threads > 1 and len(items) > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=threads) as pool:
            out = list(pool.map(process, items))
    else:
        out = [process(it) for it in items]
    timings["encode_prune"] = (time.perf_counter() - t0) * 1e3
    timings["total"] = sum(timings.values())

    n_patches = _patches_per_window(stream.width, stream.height,
                                    config.encoder.patch_size)
    bins_in = len(bins)
    windows_out = len(windows)
    tokens_in = windows_out * n_patches
    tokens_out = sum(len(w.kept_indices) for w in out)
    report = EfficiencyReport(
        events_in=len(stream), bins_in=bins_in, windows_out=windows_out,
        tokens_in=tokens_in, tokens_out=tokens_out,
        temporal_reduction=(bins_in / windows_out) if windows_out else 1.0,
        spatial_reduction=(tokens_in / tokens_out) if tokens_out else 1.0,
        timings_ms=timings,
        tokens_per_second=(
            tokens_out / (timings["total"] / 1e3)
            if timings["total"] > 0 else 0.0),
    )
    return PipelineResult(windows=out, report=report, trace=trace)


def _patches_per_window(width, height, patch_size):
    return (-(-width // patch_size)) * (-(-height // patch_size))


def calibrate_tau(stream, config, percentile=25.0):
    """Suggest a stage-1 threshold from the input's own distance profile.

    Computes every adjacent-bin distance and returns the requested
    percentile (bumped to a tiny positive value when the percentile lands
    on zero, so exact-duplicate bins still merge under the strict
    ``distance < tau`` rule).
    """
    kernel = config.resolved_kernel()
    bins = segment_into_bins(stream, config.bin_duration_us)
    if len(bins) < 2:
        return {"tau": 1e-9, "count": 0, "distances": []}
    dists = [bin_distance(bins[i], bins[i + 1], kernel, config.grid)
             for i in range(len(bins) - 1)]
    tau = float(np.percentile(dists, percentile))
    if tau <= 0.0:
        tau = 1e-9
    return {
        "tau": tau,
        "count": len(dists),
        "percentile": percentile,
        "min": float(np.min(dists)),
        "median": float(np.median(dists)),
        "max": float(np.max(dists)),
        "distances": [float(d) for d in dists],
    }


COMPONENT_ROWS = ((False, False), (True, False), (False, True), (True, True))
INTERVAL_SWEEP_MS = (5, 10, 20, 30)
ALPHA_SWEEP = (0.1, 0.2, 0.4, 0.6)


def run_ablation(stream, base_config, sweep, sweep_values=None,
                 recalibrate=True, percentile=25.0):
    """Run one of the three standard sweeps and collect a report per row.

    components: the four on/off combinations of (temporal, spatial).
    interval:   bin durations of 5/10/20/30 ms (sigma_t tracks bin/4 and
                tau is recalibrated per row unless ``recalibrate`` is off).
    alpha:      density decay values 0.1/0.2/0.4/0.6.

    Returns a list of {label, config-fields, report} dicts in sweep order.
    """
    rows = []
    if sweep == "components":
        values = sweep_values or COMPONENT_ROWS
        for temporal_on, spatial_on in values:
            cfg = replace(base_config, temporal_on=temporal_on,
                          spatial_on=spatial_on)
            res = run_pipeline(stream, cfg)
            rows.append({
                "label": f"temporal={'on' if temporal_on else 'off'},"
                         f"spatial={'on' if spatial_on else 'off'}",
                "temporal_on": temporal_on, "spatial_on": spatial_on,
                "report": res.report.to_dict(),
            })
    elif sweep == "interval":
        values = sweep_values or INTERVAL_SWEEP_MS
        for ms in values:
            cfg = replace(base_config, bin_duration_us=int(ms * 1000),
                          kernel=None)
            if recalibrate:
                tau = calibrate_tau(stream, cfg, percentile)["tau"]
                cfg = replace(cfg, merge=replace(cfg.merge, tau=tau))
            res = run_pipeline(stream, cfg)
            rows.append({
                "label": f"interval={ms}ms",
                "bin_duration_us": int(ms * 1000),
                "tau": cfg.merge.tau,
                "report": res.report.to_dict(),
            })
    elif sweep == "alpha":
        values = sweep_values or ALPHA_SWEEP
        for alpha in values:
            cfg = replace(base_config,
                          merge=replace(base_config.merge, alpha=alpha))
            res = run_pipeline(stream, cfg)
            rows.append({
                "label": f"alpha={alpha}",
                "alpha": alpha,
                "report": res.report.to_dict(),
            })
    else:
        raise ValueError(
            f"unknown sweep {sweep!r}; expected components|interval|alpha")
    return rows


def write_ablation(rows, sweep, out_dir):
    """Emit a sweep's rows as <dir>/ablation_<sweep>.{json,csv}."""
    out_dir = os.fspath(out_dir)
    os.makedirs(out_dir, exist_ok=True)
    json_path = os.path.join(out_dir, f"ablation_{sweep}.json")
    with open(json_path, "w", encoding="utf-8") as fh:
        json.dump(rows, fh, indent=2, sort_keys=True)
        fh.write("\n")
    csv_path = os.path.join(out_dir, f"ablation_{sweep}.csv")
    fieldnames = ["label", "bins_in", "windows_out", "tokens_in",
                  "tokens_out", "temporal_reduction", "spatial_reduction",
                  "total_ms", "tokens_per_second"]
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        writer = _csv.DictWriter(fh, fieldnames=fieldnames)
        writer.writeheader()
        for row in rows:
            rep = row["report"]
            writer.writerow({
                "label": row["label"],
                "bins_in": rep["bins_in"],
                "windows_out": rep["windows_out"],
                "tokens_in": rep["tokens_in"],
                "tokens_out": rep["tokens_out"],
                "temporal_reduction": rep["temporal_reduction"],
                "spatial_reduction": rep["spatial_reduction"],
                "total_ms": rep["timings_ms"]["total"],
                "tokens_per_second": rep["tokens_per_second"],
            })
    return json_path, csv_path


def default_workload(duration_us=1_000_000, seed=7, width=128, height=128,
                     kind="static_scene"):
    """The stock synthetic benchmark stream: a 5 ms-periodic static scene,
    which saturates temporal merging at every standard bin duration."""
    return generate_synthetic(SyntheticSpec(
        kind=kind, duration_us=duration_us, width=width, height=height,
        period_us=5_000, seed=seed))


def capacity_probe(max_bins, config, rate=20_000.0, seed=7,
                   width=64, height=64):
    """Stress the pipeline with a stream of exactly ``max_bins`` bins.

    Generates Poisson noise spanning max_bins * bin_duration (anchored so
    the first and last bins are non-empty), runs the pipeline under
    tracemalloc, and reports wall time and peak traced memory.  Resource
    exhaustion is caught and reported as a structured failure instead of
    crashing.
    """
    if max_bins < 1:
        raise ValueError(f"max_bins must be >= 1, got {max_bins}")
    duration = max_bins * config.bin_duration_us
    stream = generate_synthetic(SyntheticSpec(
        kind="poisson_noise", duration_us=duration, width=width,
        height=height, rate=rate, seed=seed))
    # Anchor the ends so the stream tiles into exactly max_bins bins.
    ev = stream.events
    ev["t"][0] = 0
    ev["t"][-1] = duration - 1
    stream = EventStream(width, height, ev)

    report = {
        "requested_bins": max_bins,
        "bin_duration_us": config.bin_duration_us,
        "events": len(stream),
        "ok": False,
    }
    tracemalloc.start()
    t0 = time.perf_counter()
    try:
        result = run_pipeline(stream, config)
    except MemoryError as exc:
        report["error"] = f"memory exhausted: {exc}"
        report["failed_at_bins"] = max_bins
        return report
    finally:
        _, peak = tracemalloc.get_traced_memory()
        tracemalloc.stop()
        report["wall_time_ms"] = (time.perf_counter() - t0) * 1e3
        report["peak_memory_bytes"] = int(peak)
    report["ok"] = True
    report["bins_in"] = result.report.bins_in
    report["windows_out"] = result.report.windows_out
    report["tokens_out"] = result.report.tokens_out
    return report
