import numpy as np
import pytest

from evsparse.encoder import EncoderConfig
from evsparse.intensity import GridSpec, KernelParams
from evsparse.pipeline import (PipelineConfig, calibrate_tau, capacity_probe,
                               default_workload, run_ablation, run_pipeline,
                               write_ablation)
from evsparse.synthetic import SyntheticSpec, generate_synthetic
from evsparse.temporal import MergeConfig

SMALL_ENCODER = EncoderConfig(patch_size=16, embed_dim=32, heads=4, layers=1)


def small_config(**overrides):
    base = dict(
        bin_duration_us=10_000,
        kernel=KernelParams(2.0, 2.0, 2_500.0),
        grid=GridSpec(8, 8, 4),
        merge=MergeConfig(tau=1e-9),
        encoder=SMALL_ENCODER,
        rho=0.25,
    )
    base.update(overrides)
    return PipelineConfig(**base)


def static_stream(duration_us=100_000, seed=7, width=64, height=64):
    return generate_synthetic(SyntheticSpec(
        kind="static_scene", duration_us=duration_us, width=width,
        height=height, seed=seed))


class TestRunPipeline:
    def test_both_stages_off_is_identity_in_counts(self):
        stream = static_stream()
        result = run_pipeline(stream, small_config(
            temporal_on=False, spatial_on=False))
        rep = result.report
        assert rep.windows_out == rep.bins_in == 10
        assert rep.tokens_out == rep.tokens_in
        assert rep.temporal_reduction == 1.0
        assert rep.spatial_reduction == 1.0

    def test_static_scene_collapses_to_one_window(self):
        stream = static_stream()
        result = run_pipeline(stream, small_config(spatial_on=False))
        rep = result.report
        assert rep.bins_in == 10
        assert rep.windows_out == 1
        assert rep.temporal_reduction == 10.0

    def test_rho_quarter_keeps_quarter_tokens(self):
        stream = static_stream(width=128, height=128)
        result = run_pipeline(stream, small_config(temporal_on=False))
        # 128x128 with 16 px patches: 64 tokens, ceil(0.25 * 64) = 16
        for w in result.windows:
            assert len(w.kept_indices) == 16
            assert w.vectors.shape == (16, 32)
        rep = result.report
        assert rep.spatial_reduction == pytest.approx(4.0)

    def test_empty_stream(self):
        stream = static_stream()
        stream.events = stream.events[:0]
        result = run_pipeline(stream, small_config())
        rep = result.report
        assert rep.bins_in == 0 and rep.windows_out == 0
        assert rep.temporal_reduction == 1.0
        assert rep.spatial_reduction == 1.0

    def test_geometry_mismatch_rejected(self):
        stream = static_stream()
        stream.width = 16
        with pytest.raises(ValueError):
            run_pipeline(stream, small_config())

    def test_report_consistency_on_random_streams(self):
        rng = np.random.default_rng(0)
        for kind in ("poisson_noise", "two_phase", "burst"):
            stream = generate_synthetic(SyntheticSpec(
                kind=kind, duration_us=60_000, width=64, height=64,
                seed=int(rng.integers(0, 100))))
            cfg = small_config(merge=MergeConfig(tau=float(
                rng.uniform(0.1, 5.0))))
            rep = run_pipeline(stream, cfg).report
            assert rep.windows_out <= rep.bins_in
            assert rep.tokens_out <= rep.tokens_in
            assert rep.temporal_reduction >= 1.0
            assert rep.spatial_reduction >= 1.0

    def test_thread_count_does_not_change_output(self):
        stream = generate_synthetic(SyntheticSpec(
            kind="two_phase", duration_us=100_000, width=64, height=64,
            seed=11))
        cfg = small_config(merge=MergeConfig(tau=1.0))
        one = run_pipeline(stream, cfg, threads=1)
        eight = run_pipeline(stream, cfg, threads=8)
        assert len(one.windows) == len(eight.windows)
        for a, b in zip(one.windows, eight.windows):
            assert np.array_equal(a.kept_indices, b.kept_indices)
            assert np.array_equal(a.vectors, b.vectors)

    def test_trace_covers_stage1_decisions(self):
        stream = static_stream()
        result = run_pipeline(stream, small_config(spatial_on=False))
        stage1 = [r for r in result.trace if r.stage == 1]
        assert len(stage1) == 9
        assert all(r.merged for r in stage1)


class TestCalibrateTau:
    def test_zero_population_bumped_positive(self):
        summary = calibrate_tau(static_stream(), small_config())
        assert summary["tau"] == 1e-9
        assert summary["count"] == 9
        assert summary["max"] == 0.0

    def test_percentile_of_mixed_population(self):
        stream = generate_synthetic(SyntheticSpec(
            kind="two_phase", duration_us=100_000, width=64, height=64,
            seed=2))
        summary = calibrate_tau(stream, small_config(), percentile=90.0)
        assert summary["tau"] > 0.0
        assert summary["tau"] <= summary["max"]
        assert len(summary["distances"]) == summary["count"]

    def test_single_bin_stream(self):
        stream = static_stream(duration_us=10_000)
        summary = calibrate_tau(stream, small_config())
        assert summary["count"] == 0
        assert summary["tau"] == 1e-9


class TestAblation:
    def test_components_sweep_rows(self):
        rows = run_ablation(static_stream(), small_config(), "components")
        assert [(r["temporal_on"], r["spatial_on"]) for r in rows] == [
            (False, False), (True, False), (False, True), (True, True)]
        off = rows[0]["report"]
        on = rows[3]["report"]
        assert off["temporal_reduction"] == 1.0
        assert off["spatial_reduction"] == 1.0
        assert on["temporal_reduction"] > 1.0
        assert on["spatial_reduction"] > 1.0

    def test_interval_sweep_rows(self):
        stream = default_workload(duration_us=300_000)
        rows = run_ablation(stream, small_config(), "interval")
        assert [r["bin_duration_us"] for r in rows] == [
            5_000, 10_000, 20_000, 30_000]

    def test_interval_monotone_reduction_on_static(self):
        stream = default_workload(duration_us=600_000)
        rows = run_ablation(stream, small_config(), "interval")
        reductions = [r["report"]["temporal_reduction"] for r in rows]
        assert all(a >= b - 1e-9 for a, b in zip(reductions, reductions[1:]))

    def test_alpha_sweep_rows(self):
        rows = run_ablation(static_stream(), small_config(), "alpha")
        assert [r["alpha"] for r in rows] == [0.1, 0.2, 0.4, 0.6]

    def test_unknown_sweep(self):
        with pytest.raises(ValueError):
            run_ablation(static_stream(), small_config(), "bogus")

    def test_write_ablation_emits_csv_and_json(self, tmp_path):
        rows = run_ablation(static_stream(), small_config(), "alpha")
        json_path, csv_path = write_ablation(rows, "alpha", tmp_path)
        assert json_path.endswith("ablation_alpha.json")
        text = open(csv_path).read().splitlines()
        assert text[0].startswith("label,")
        assert len(text) == 5


class TestCapacityProbe:
    def test_small_probe_succeeds(self):
        report = capacity_probe(10, small_config())
        assert report["ok"]
        assert report["bins_in"] == 10
        assert report["peak_memory_bytes"] > 0
        assert report["wall_time_ms"] > 0

    def test_zero_bins_is_usage_error(self):
        with pytest.raises(ValueError):
            capacity_probe(0, small_config())
