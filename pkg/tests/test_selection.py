"""Color histograms, similarity blending, and proposal selection."""

import math

import numpy as np
import pytest

from cftrack.imaging import BBox
from cftrack.proposals import Proposal
from cftrack.selection import (
    HsvHistogram,
    SelectorConfig,
    SelectorState,
    TargetState,
    bhattacharyya,
    color_histogram,
    fine_tune_state,
    hsv_bin,
    proposal_score,
    select_proposals,
    update_contamination,
    update_mean_confidence,
)

from conftest import make_patch


def hist(counts):
    return HsvHistogram(np.asarray(counts), int(np.sum(counts)))


def two_bin(a, b):
    counts = np.zeros(256, dtype=np.int64)
    counts[0], counts[1] = a, b
    return hist(counts)


class TestHsvBin:
    def test_extremes(self):
        assert hsv_bin([0.0, 0.0, 0.0]) == 0
        assert hsv_bin([255.0, 255.0, 255.0]) == 255

    def test_mixed_channels(self):
        # h=128 -> level 8, s=100 -> level 1, v=200 -> level 3
        assert hsv_bin([128.0, 100.0, 200.0]) == 16 * 8 + 4 * 1 + 3

    def test_vectorized_matches_scalar(self, rng):
        triples = rng.uniform(0.0, 255.0, size=(50, 3))
        batch = hsv_bin(triples)
        for row, got in zip(triples, batch):
            assert hsv_bin(row) == got

    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            hsv_bin([256.0, 0.0, 0.0])


class TestColorHistogram:
    def test_uniform_patch_single_bin(self):
        h = color_histogram(make_patch(np.full((4, 5, 3), 0.5)))
        assert h.pixel_count == 20
        # gray 0.5 -> H=0, S=0, V=127.5 -> bin 1
        assert h.bins[1] == 20
        assert int(h.bins.sum()) == 20

    def test_pixel_conservation(self, rng):
        h = color_histogram(make_patch(rng.random((7, 9, 3))))
        assert int(h.bins.sum()) == h.pixel_count == 63

    def test_two_color_patch_splits(self):
        px = np.zeros((2, 2, 3))
        px[0, :, 0] = 1.0  # red rows
        px[1, :, 2] = 1.0  # blue rows
        h = color_histogram(make_patch(px))
        red_bin = hsv_bin([0.0, 255.0, 255.0])
        blue_bin = hsv_bin([2.0 / 3.0 * 255.0, 255.0, 255.0])
        assert h.bins[red_bin] == 2
        assert h.bins[blue_bin] == 2


class TestBhattacharyya:
    def test_identical_is_one(self):
        h = two_bin(3, 1)
        assert bhattacharyya(h, h) == pytest.approx(1.0, abs=1e-12)

    def test_disjoint_is_zero(self):
        a = two_bin(4, 0)
        b = two_bin(0, 4)
        assert bhattacharyya(a, b) == 0.0

    def test_mirrored_three_one_split(self):
        # sum of two sqrt(0.75 * 0.25) terms
        a = two_bin(3, 1)
        b = two_bin(1, 3)
        assert bhattacharyya(a, b) == pytest.approx(2.0 * math.sqrt(0.1875), abs=1e-12)

    def test_bounds_on_random_histograms(self, rng):
        for _ in range(500):
            a = hist(rng.integers(0, 50, size=256) + (rng.random(256) < 0.1))
            b = hist(rng.integers(0, 50, size=256) + (rng.random(256) < 0.1))
            v = bhattacharyya(a, b)
            assert 0.0 <= v <= 1.0 + 1e-12

    def test_symmetry(self, rng):
        a = hist(rng.integers(1, 20, size=256))
        b = hist(rng.integers(1, 20, size=256))
        assert bhattacharyya(a, b) == pytest.approx(bhattacharyya(b, a), abs=1e-15)


class TestHsvHistogramValidation:
    def test_count_mismatch_raises(self):
        counts = np.zeros(256, dtype=np.int64)
        counts[0] = 4
        with pytest.raises(ValueError):
            HsvHistogram(counts, 5)

    def test_negative_bin_raises(self):
        counts = np.zeros(256, dtype=np.int64)
        counts[0], counts[1] = 5, -1
        with pytest.raises(ValueError):
            HsvHistogram(counts, 4)


class TestMeanConfidence:
    def test_first_observation_initializes(self):
        state = SelectorState()
        assert update_mean_confidence(state, 0.8) == 0.8
        assert state.f_mean == 0.8

    def test_small_step_toward_new_peak(self):
        state = SelectorState(eta=0.01, f_mean=0.5)
        got = update_mean_confidence(state, 0.9)
        assert got == pytest.approx(0.504, abs=1e-12)

    def test_fixed_point(self):
        state = SelectorState(eta=0.3, f_mean=0.7)
        assert update_mean_confidence(state, 0.7) == pytest.approx(0.7, abs=1e-15)

    def test_full_rate_replaces(self):
        state = SelectorState(eta=1.0, f_mean=0.2)
        assert update_mean_confidence(state, 0.9) == 0.9

    def test_negative_peak_raises(self):
        with pytest.raises(ValueError):
            update_mean_confidence(SelectorState(), -0.1)


class TestContamination:
    def test_low_peaks_accumulate(self):
        state = SelectorState(eta_prime=0.6, f_mean=1.0, anchor_frame=4)
        for i, frame in enumerate([5, 6, 7], start=1):
            delta, anchor = update_contamination(state, 0.3, frame)
            assert delta == i
            assert anchor == 4  # unchanged while contaminated

    def test_confident_frame_resets_and_anchors(self):
        state = SelectorState(eta_prime=0.6, f_mean=1.0, delta=3)
        delta, anchor = update_contamination(state, 0.9, 12)
        assert delta == 0
        assert anchor == 12

    def test_equality_counts_as_confident(self):
        state = SelectorState(eta_prime=0.6, f_mean=1.0, delta=2)
        delta, _ = update_contamination(state, 0.6, 8)
        assert delta == 0

    def test_zero_threshold_never_contaminates(self):
        state = SelectorState(eta_prime=0.0, f_mean=1.0)
        for frame in range(5):
            delta, _ = update_contamination(state, 0.0, frame)
            assert delta == 0

    def test_uninitialized_mean_raises(self):
        with pytest.raises(ValueError):
            update_contamination(SelectorState(), 0.5, 1)


class TestProposalScore:
    def test_zero_delta_is_previous_similarity(self):
        assert proposal_score(0.9, 0.3, 0, 0.15) == 0.3

    def test_huge_delta_is_initial_similarity(self):
        got = proposal_score(0.9, 0.3, 10**6, 0.15)
        assert got == pytest.approx(0.9, abs=1e-9)

    def test_intermediate_blend(self):
        got = proposal_score(0.8, 0.4, 5, 0.15)
        w = math.exp(-0.75)
        assert got == pytest.approx((1.0 - w) * 0.8 + w * 0.4, abs=1e-12)
        assert got == pytest.approx(0.6110533789035941, abs=1e-12)

    def test_validation(self):
        with pytest.raises(ValueError):
            proposal_score(1.2, 0.5, 0, 0.15)
        with pytest.raises(ValueError):
            proposal_score(0.5, 0.5, -1, 0.15)


def scored_proposal(sim_init, sim_prev, edge=1.0):
    p = Proposal(BBox(0, 0, 10, 10), edge_score=edge)
    p.sim_init = sim_init
    p.sim_prev = sim_prev
    return p


class TestSelectProposals:
    def test_single_proposal_survives(self):
        state = SelectorState(keep_fraction=0.5)
        props = [scored_proposal(0.5, 0.5)]
        assert select_proposals(props, state) == props

    def test_keep_all_preserves_set(self, rng):
        state = SelectorState(keep_fraction=1.0)
        props = [scored_proposal(s, t) for s, t in rng.random((6, 2))]
        out = select_proposals(props, state)
        assert sorted(map(id, out)) == sorted(map(id, props))
        scores = [p.combined_score for p in out]
        assert scores == sorted(scores, reverse=True)

    def test_top_half_matches_recomputed_ranking(self, rng):
        state = SelectorState(keep_fraction=0.5, delta=3, alpha_d=0.15)
        sims = rng.random((7, 2))
        props = [scored_proposal(s, t, edge=float(e)) for (s, t), e in zip(sims, rng.random(7))]
        out = select_proposals(list(props), state)
        assert len(out) == 4  # ceil(0.5 * 7)

        w = math.exp(-0.15 * 3)
        expect = [(1.0 - w) * s + w * t for s, t in sims]
        ranking = sorted(
            range(7), key=lambda i: (-expect[i], -props[i].edge_score, i)
        )
        assert [id(p) for p in out] == [id(props[i]) for i in ranking[:4]]

    def test_instance_mode_overrides(self):
        props = [scored_proposal(0.9, 0.1), scored_proposal(0.1, 0.9)]
        init_first = select_proposals(list(props), SelectorState(instance_mode="init", keep_fraction=0.5))
        assert init_first[0] is props[0]
        prev_first = select_proposals(list(props), SelectorState(instance_mode="prev", keep_fraction=0.5))
        assert prev_first[0] is props[1]

    def test_ties_fall_back_to_edge_then_order(self):
        a = scored_proposal(0.5, 0.5, edge=0.2)
        b = scored_proposal(0.5, 0.5, edge=0.9)
        c = scored_proposal(0.5, 0.5, edge=0.9)
        out = select_proposals([a, b, c], SelectorState(keep_fraction=1.0))
        assert [id(p) for p in out] == [id(b), id(c), id(a)]

    def test_missing_similarity_raises(self):
        p = Proposal(BBox(0, 0, 5, 5), edge_score=1.0)
        with pytest.raises(ValueError):
            select_proposals([p], SelectorState())

    def test_empty_input(self):
        assert select_proposals([], SelectorState()) == []


class TestFineTune:
    def prop(self, cx, cy, w, h):
        return Proposal(BBox.from_center(cx, cy, w, h), edge_score=1.0)

    def test_beta_zero_keeps_prediction(self):
        out = fine_tune_state((10.0, 20.0), (8.0, 6.0), self.prop(30, 40, 16, 12), 0.0)
        assert out.center == (10.0, 20.0)
        assert out.size == (8.0, 6.0)

    def test_beta_one_takes_proposal(self):
        out = fine_tune_state((10.0, 20.0), (8.0, 6.0), self.prop(30, 40, 16, 12), 1.0)
        assert out.center == (30.0, 40.0)
        assert out.size == pytest.approx((16.0, 12.0))

    def test_reference_blend(self):
        out = fine_tune_state((10.0, 10.0), (30.0, 40.0), self.prop(20, 10, 40, 50), 0.70)
        assert out.center == pytest.approx((17.0, 10.0), abs=1e-12)
        assert out.size == pytest.approx((37.0, 47.0), abs=1e-12)

    def test_midpoint_is_arithmetic_mean(self):
        out = fine_tune_state((0.0, 0.0), (10.0, 10.0), self.prop(10, 20, 20, 30), 0.5)
        assert out.center == pytest.approx((5.0, 10.0))
        assert out.size == pytest.approx((15.0, 20.0))

    def test_bad_beta_raises(self):
        with pytest.raises(ValueError):
            fine_tune_state((0.0, 0.0), (1.0, 1.0), self.prop(0, 0, 1, 1), 1.5)


class TestStateContainers:
    def test_target_state_box(self):
        st = TargetState((10.0, 8.0), (4.0, 2.0))
        assert st.box == BBox(8.0, 7.0, 4.0, 2.0)

    def test_target_state_rejects_bad_size(self):
        with pytest.raises(ValueError):
            TargetState((0.0, 0.0), (0.0, 2.0))

    def test_state_from_config_copies_knobs(self):
        cfg = SelectorConfig(eta=0.05, eta_prime=0.4, alpha_d=0.2, keep_fraction=0.7, beta=0.3, instance_mode="init")
        st = SelectorState.from_config(cfg)
        assert (st.eta, st.eta_prime, st.alpha_d) == (0.05, 0.4, 0.2)
        assert (st.keep_fraction, st.beta, st.instance_mode) == (0.7, 0.3, "init")
        assert st.f_mean is None and st.delta == 0

    def test_config_validation(self):
        with pytest.raises(ValueError):
            SelectorConfig(eta=0.0)
        with pytest.raises(ValueError):
            SelectorConfig(keep_fraction=0.0)
        with pytest.raises(ValueError):
            SelectorConfig(instance_mode="other")
