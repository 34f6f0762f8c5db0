import math

import numpy as np
import pytest

from evsparse.encoder import EncoderConfig, ToyEncoder, patch_grid, rasterize
from evsparse.events import EventBin
from evsparse.sdga import (AttentionConfig, DensityEncoder, DensityMap,
                           ModulatedAttention, density_encode, keep_count,
                           sdga, token_density, token_selector)

from oracles import enumerate_best_subset, naive_sdga


def window_of(t, x, y, p, width=64, height=64):
    ev = np.zeros(len(t), dtype=[("t", np.int64), ("x", np.int32),
                                 ("y", np.int32), ("p", np.int8)])
    ev["t"], ev["x"], ev["y"], ev["p"] = t, x, y, p
    return EventBin(t_start=0, t_end=10_000, events=ev, width=width,
                    height=height)


def random_window(rng, n, width=64, height=64):
    return window_of(np.sort(rng.integers(0, 10_000, n)),
                     rng.integers(0, width, n), rng.integers(0, height, n),
                     rng.choice([1, -1], n), width=width, height=height)


LAYOUT_4X4 = patch_grid(64, 64, 16)


class TestTokenDensity:
    def test_empty_window_all_zero(self):
        d = token_density(window_of([], [], [], []), LAYOUT_4X4)
        assert not d.raw.any()
        assert not d.normalized.any()

    def test_all_events_in_one_patch(self):
        w = window_of([1, 2, 3], [2, 5, 15], [2, 5, 15], [1, 1, -1])
        d = token_density(w, LAYOUT_4X4)
        assert d.raw[0] == 3
        assert d.raw.sum() == 3
        np.testing.assert_array_equal(
            d.normalized, np.eye(16)[0])

    def test_counts_match_membership_oracle(self):
        rng = np.random.default_rng(0)
        w = random_window(rng, 5_000)
        d = token_density(w, LAYOUT_4X4)
        expected = np.zeros(16, dtype=int)
        for e in w.events:
            for j, (x0, y0, x1, y1) in enumerate(LAYOUT_4X4):
                if x0 <= e["x"] < x1 and y0 <= e["y"] < y1:
                    expected[j] += 1
                    break
        np.testing.assert_array_equal(d.raw, expected)
        assert d.raw.sum() == 5_000

    def test_normalisation_peak_is_one(self):
        rng = np.random.default_rng(1)
        d = token_density(random_window(rng, 300), LAYOUT_4X4)
        assert d.normalized.max() == 1.0
        assert np.all(d.normalized >= 0.0)


class TestDensityEncode:
    def test_zero_maps_to_zero(self):
        enc = DensityEncoder(weight=1.0, bias=0.0)
        assert density_encode(np.array([0.0]), enc)[0] == 0.0

    def test_unit_input_erf_value(self):
        enc = DensityEncoder(weight=1.0, bias=0.0)
        expected = 0.5 * (1 + math.erf(1 / math.sqrt(2)))
        assert density_encode(np.array([1.0]), enc)[0] \
            == pytest.approx(expected, abs=1e-12)
        assert expected == pytest.approx(0.84134, abs=5e-6)

    def test_zero_weight_and_bias_all_zero(self):
        enc = DensityEncoder(weight=0.0, bias=0.0)
        out = density_encode(np.linspace(0, 1, 7), enc)
        np.testing.assert_array_equal(out, np.zeros(7))

    def test_accepts_density_map(self):
        enc = DensityEncoder(weight=2.0, bias=-0.5)
        dm = DensityMap(raw=np.array([2, 1]),
                        normalized=np.array([1.0, 0.5]))
        out = density_encode(dm, enc)
        assert out.shape == (2,)

    def test_seeded_draw_is_reproducible(self):
        a = DensityEncoder.from_seed(3)
        b = DensityEncoder.from_seed(3)
        assert (a.weight, a.bias) == (b.weight, b.bias)
        assert a.weight > 0


class TestModulatedAttention:
    def test_zeroed_projections_give_uniform_rows(self):
        attn = ModulatedAttention(AttentionConfig(embed_dim=8, heads=2))
        attn.w_q[:] = 0.0
        attn.w_k[:] = 0.0
        tokens = np.random.default_rng(2).normal(size=(5, 8))
        _, weights = attn(tokens, np.full(5, 0.37))
        np.testing.assert_allclose(weights, np.full((5, 5), 0.2), atol=1e-12)

    def test_log_two_modulation_gives_two_thirds(self):
        attn = ModulatedAttention(AttentionConfig(embed_dim=4, heads=1))
        attn.w_q[:] = 0.0
        attn.w_k[:] = 0.0
        tokens = np.random.default_rng(3).normal(size=(2, 4))
        _, weights = attn(tokens, np.array([math.log(2.0), 0.0]))
        np.testing.assert_allclose(weights[0], [2 / 3, 1 / 3], atol=1e-12)
        np.testing.assert_allclose(weights[1], [2 / 3, 1 / 3], atol=1e-12)

    def test_constant_modulation_shift_invariance(self):
        rng = np.random.default_rng(4)
        attn = ModulatedAttention(AttentionConfig(embed_dim=16, heads=4))
        tokens = rng.normal(size=(9, 16))
        out0, w0 = attn(tokens, np.zeros(9))
        outc, wc = attn(tokens, np.full(9, 3.7))
        np.testing.assert_allclose(w0, wc, atol=1e-6)
        np.testing.assert_allclose(out0, outc, atol=1e-6)

    def test_rows_sum_to_one(self):
        rng = np.random.default_rng(5)
        attn = ModulatedAttention(AttentionConfig(embed_dim=16, heads=2))
        for _ in range(20):
            n = int(rng.integers(1, 20))
            tokens = rng.normal(size=(n, 16))
            f = rng.normal(size=n)
            _, weights = attn(tokens, f)
            np.testing.assert_allclose(weights.sum(axis=1), 1.0, atol=1e-6)

    def test_raising_modulation_raises_weights(self):
        rng = np.random.default_rng(6)
        attn = ModulatedAttention(AttentionConfig(embed_dim=16, heads=2))
        tokens = rng.normal(size=(7, 16))
        f = rng.normal(size=7)
        _, w_before = attn(tokens, f)
        bumped = f.copy()
        bumped[3] += 0.9
        _, w_after = attn(tokens, bumped)
        assert np.all(w_after[:, 3] > w_before[:, 3])

    def test_shape_validation(self):
        attn = ModulatedAttention(AttentionConfig(embed_dim=8, heads=2))
        with pytest.raises(ValueError):
            attn(np.zeros((3, 8)), np.zeros(4))
        with pytest.raises(ValueError):
            attn(np.zeros((3, 6)), np.zeros(3))


class TestTokenSelector:
    def test_rho_one_keeps_everything(self):
        rng = np.random.default_rng(7)
        outputs = rng.normal(size=(6, 4))
        weights = np.full((6, 6), 1 / 6)
        res = token_selector(outputs, weights, 1.0)
        np.testing.assert_array_equal(res.kept_indices, np.arange(6))
        np.testing.assert_array_equal(res.outputs, outputs)

    def test_top_two_by_importance(self):
        outputs = np.arange(8.0).reshape(4, 2)
        weights = np.array([[0.1, 0.4, 0.3, 0.2]] * 4) / 4
        res = token_selector(outputs, weights, 0.5)
        np.testing.assert_array_equal(res.kept_indices, [1, 2])
        np.testing.assert_array_equal(res.outputs, outputs[[1, 2]])

    def test_ties_break_to_lower_index(self):
        outputs = np.zeros((4, 2))
        weights = np.full((4, 4), 0.25)
        res = token_selector(outputs, weights, 0.5)
        np.testing.assert_array_equal(res.kept_indices, [0, 1])

    def test_count_contract_exact_ceil(self):
        # 0.1 * 20 is 2.0000000000000004 in floats; must still keep 2
        outputs = np.zeros((20, 2))
        weights = np.full((20, 20), 1 / 20)
        res = token_selector(outputs, weights, 0.1)
        assert len(res.kept_indices) == 2
        assert keep_count(20, 0.1) == 2
        assert keep_count(10, 0.25) == 3
        assert keep_count(1, 0.1) == 1

    def test_invalid_rho(self):
        with pytest.raises(ValueError):
            token_selector(np.zeros((3, 2)), np.full((3, 3), 1 / 3), 0.0)
        with pytest.raises(ValueError):
            token_selector(np.zeros((3, 2)), np.full((3, 3), 1 / 3), 1.2)

    def test_matches_subset_enumeration_with_ties(self):
        rng = np.random.default_rng(8)
        for n in range(1, 9):
            for _ in range(30):
                # quarter-integer importances force exact ties
                importance = rng.integers(0, 4, size=n) / 4.0
                weights = np.zeros((n, n))
                weights[0] = importance
                outputs = rng.normal(size=(n, 3))
                for rho in (0.1, 0.25, 0.5, 1.0):
                    res = token_selector(outputs, weights, rho)
                    k = len(res.kept_indices)
                    expected = enumerate_best_subset(importance.tolist(), k)
                    assert res.kept_indices.tolist() == expected
                    assert np.all(np.diff(res.kept_indices) > 0)


class TestSdga:
    def test_empty_window_keeps_quarter(self):
        w = window_of([], [], [], [])
        tokens = ToyEncoder(EncoderConfig()).encode(rasterize(w, 64, 64))
        res = sdga(w, tokens, DensityEncoder(), 0.25)
        assert len(res.kept_indices) == 4  # ceil(0.25 * 16)

    def test_dense_patch_wins_under_uniform_logits(self):
        w = window_of([1, 2, 3, 4], [40, 41, 40, 41], [20, 21, 21, 20],
                      [1, 1, 1, -1])
        tokens = ToyEncoder(EncoderConfig()).encode(rasterize(w, 64, 64))
        attn = ModulatedAttention(AttentionConfig(embed_dim=64, heads=4))
        attn.w_q[:] = 0.0
        attn.w_k[:] = 0.0
        res = sdga(w, tokens, DensityEncoder(weight=1.0, bias=0.0), 0.25,
                   attention=attn)
        dense_token = 1 * 4 + 2  # row 1, col 2 of the 4x4 patch grid
        assert np.argmax(res.importance) == dense_token
        top = np.max(np.delete(res.importance, dense_token))
        assert res.importance[dense_token] > top

    def test_matches_naive_reference(self):
        rng = np.random.default_rng(9)
        for _ in range(5):
            w = random_window(rng, int(rng.integers(0, 2_000)))
            tokens = ToyEncoder(EncoderConfig()).encode(rasterize(w, 64, 64))
            enc = DensityEncoder(weight=float(rng.uniform(0.2, 2.0)),
                                 bias=float(rng.normal(0, 0.3)))
            attn = ModulatedAttention(
                AttentionConfig(embed_dim=64, heads=4,
                                seed=int(rng.integers(0, 100))))
            res = sdga(w, tokens, enc, 0.5, attention=attn)
            kept, outputs, importance = naive_sdga(
                [(int(e["x"]), int(e["y"])) for e in w.events],
                tokens.patch_layout.tolist(), tokens.patches,
                attn.w_q, attn.w_k, attn.w_v, attn.w_o, 4,
                enc.weight, enc.bias, 0.5)
            assert res.kept_indices.tolist() == kept
            np.testing.assert_allclose(res.outputs, outputs, atol=1e-6)
            np.testing.assert_allclose(res.importance, importance, atol=1e-6)

    def test_debug_record_fields(self):
        rng = np.random.default_rng(10)
        w = random_window(rng, 100)
        tokens = ToyEncoder(EncoderConfig()).encode(rasterize(w, 64, 64))
        res, dbg = sdga(w, tokens, DensityEncoder(), 0.25, return_debug=True)
        assert set(dbg) == {"density_raw", "density_normalized",
                            "modulation", "importance", "kept_indices"}
        assert dbg["kept_indices"] == res.kept_indices.tolist()
        assert sum(dbg["density_raw"]) == 100
