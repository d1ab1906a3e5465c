"""Zero-shot scoring, the seen/unseen gate, and probability fusion."""

import numpy as np
import pytest

from rail.dual import dual_init
from rail.errors import DimensionMismatch, EmptyLabelSet
from rail.fusion import (
    FusionConfig,
    argmax_lowest_global,
    classify,
    classify_batch,
    fuse,
    gate,
    softmax,
    zero_shot_logits,
)
from rail.projection import KernelSpec
from rail.store import LabelRegistry, register_domain, synthesize_domains

from conftest import registry_for


class TestSoftmax:
    def test_known_values(self):
        """softmax([1, 0, 0]) = [e, 1, 1] / (e + 2)."""
        out = softmax(np.array([1.0, 0.0, 0.0]))
        e = np.e
        np.testing.assert_allclose(out, [e / (e + 2), 1 / (e + 2), 1 / (e + 2)],
                                   rtol=1e-15)

    def test_rows_sum_to_one(self):
        rng = np.random.default_rng(0)
        x = rng.standard_normal((50, 7)) * 30
        out = softmax(x)
        np.testing.assert_allclose(out.sum(axis=1), 1.0, atol=1e-12)
        assert (out > 0).all()

    def test_shift_invariance(self):
        x = np.array([1.0, 2.0, 3.0])
        np.testing.assert_allclose(softmax(x), softmax(x + 1000.0), atol=1e-15)

    def test_huge_logits_stable(self):
        out = softmax(np.array([1e5, 0.0]))
        assert np.isfinite(out).all()
        np.testing.assert_allclose(out, [1.0, 0.0], atol=1e-12)


class TestZeroShot:
    def test_prefers_matching_text_vector(self):
        texts = np.eye(3)
        emb = np.array([0.0, 1.0, 0.0])
        probs = zero_shot_logits(emb, texts)
        assert np.argmax(probs) == 1

    def test_scale_sharpens(self):
        texts = np.eye(2)
        emb = np.array([0.9, np.sqrt(1 - 0.81)])
        soft = zero_shot_logits(emb, texts, scale=1.0)
        sharp = zero_shot_logits(emb, texts, scale=100.0)
        assert sharp[0] > soft[0]

    def test_empty_table_rejected(self):
        with pytest.raises(EmptyLabelSet):
            zero_shot_logits(np.ones(4), np.zeros((0, 4)))

    def test_dim_mismatch(self):
        with pytest.raises(DimensionMismatch):
            zero_shot_logits(np.ones(3), np.eye(4))


class TestGate:
    def test_seen_argmax_is_in_distribution(self):
        d = gate(np.array([0.1, 0.7, 0.2]), np.array([False, True, False]))
        assert d.in_distribution and d.index == 1

    def test_unseen_argmax_is_out(self):
        d = gate(np.array([0.1, 0.7, 0.2]), np.array([True, False, True]))
        assert not d.in_distribution and d.index == 1

    def test_tie_goes_to_lowest_index(self):
        d = gate(np.array([0.4, 0.4, 0.2]), np.array([True, False, False]))
        assert d.in_distribution and d.index == 0

    def test_shape_mismatch(self):
        with pytest.raises(DimensionMismatch):
            gate(np.array([0.5, 0.5]), np.array([True]))


class TestFuse:
    def test_hand_computed_blend(self):
        """beta 0.8, adapter logits [0.9, 0.1], zero-shot slice [0.2, 0.3]:
        the stronger zero-shot mass on class 1 overrides the adapter."""
        ad = np.array([0.9, 0.1])
        zs = np.array([0.2, 0.3, 0.5])
        out = fuse(ad, zs, [0, 1], beta=0.8)
        p = np.exp(ad) / np.exp(ad).sum()
        expect = 0.2 * p + 0.8 * zs[:2]
        np.testing.assert_allclose(out, expect, rtol=1e-15)
        assert np.argmax(out) == 1
        # the slice is not renormalized: total mass stays below 1
        assert out.sum() < 1.0

    def test_beta_zero_is_adapter_only(self):
        ad = np.array([2.0, -1.0, 0.5])
        zs = np.array([0.0, 0.0, 0.0, 1.0])
        out = fuse(ad, zs, [0, 1, 2], beta=0.0)
        np.testing.assert_allclose(out, softmax(ad), rtol=1e-15)

    def test_beta_one_is_zero_shot_slice(self):
        ad = np.array([2.0, -1.0])
        zs = np.array([0.1, 0.2, 0.7])
        out = fuse(ad, zs, [2, 0], beta=1.0)
        np.testing.assert_allclose(out, [0.7, 0.1], rtol=1e-15)

    def test_raw_skips_adapter_softmax(self):
        ad = np.array([0.5, 0.25])
        zs = np.array([0.5, 0.5])
        out = fuse(ad, zs, [0, 1], beta=0.5, raw=True)
        np.testing.assert_allclose(out, 0.5 * ad + 0.5 * 0.5, rtol=1e-15)

    def test_slice_follows_learned_order(self):
        ad = np.array([0.0, 0.0])
        zs = np.array([0.1, 0.2, 0.7])
        out = fuse(ad, zs, [2, 1], beta=1.0)
        np.testing.assert_allclose(out, [0.7, 0.2], rtol=1e-15)

    def test_wrong_width_rejected(self):
        with pytest.raises(DimensionMismatch):
            fuse(np.zeros(3), np.ones(4) / 4, [0, 1])


class TestArgmaxLowestGlobal:
    def test_maps_through_global_indices(self):
        scores = np.array([[0.1, 0.9], [0.8, 0.2]])
        out = argmax_lowest_global(scores, [5, 3])
        np.testing.assert_array_equal(out, [3, 5])

    def test_exact_tie_takes_lowest_global(self):
        scores = np.array([[0.5, 0.5]])
        np.testing.assert_array_equal(argmax_lowest_global(scores, [9, 4]), [4])
        np.testing.assert_array_equal(argmax_lowest_global(scores, [4, 9]), [4])


class TestClassifyBatch:
    def _setup(self):
        trains, table = synthesize_domains(2, 3, 30, 16, 1.2, seed=13)
        reg = registry_for(trains)
        text = table.aligned_to(reg)
        return trains, reg, text

    def test_no_adapter_is_pure_zero_shot(self):
        trains, reg, text = self._setup()
        ds = reg.globalize(trains[0])
        preds = classify_batch(ds.features, None, text, reg)
        expect = np.argmax(zero_shot_logits(ds.features, text), axis=1)
        np.testing.assert_array_equal(preds, expect)

    def test_unseen_items_keep_zero_shot_predictions(self):
        """Learning domain 0 must not move any prediction whose zero-shot
        argmax falls in domain 1."""
        trains, reg, text = self._setup()
        d0 = reg.globalize(trains[0])
        d1 = reg.globalize(trains[1])
        adapter = dual_init(d0.features, d0.labels, reg,
                            KernelSpec(kind="rbf", gamma=0.5), 0.1)
        reg.mark_learned("dom00")
        zs_preds = np.argmax(zero_shot_logits(d1.features, text), axis=1)
        fused_preds = classify_batch(d1.features, adapter, text, reg)
        unseen = ~reg.seen_mask[zs_preds]
        assert unseen.any()
        np.testing.assert_array_equal(fused_preds[unseen], zs_preds[unseen])

    def test_single_item_wrapper_matches_batch(self):
        trains, reg, text = self._setup()
        ds = reg.globalize(trains[0])
        adapter = dual_init(ds.features, ds.labels, reg,
                            KernelSpec(kind="rbf", gamma=0.5), 0.1)
        reg.mark_learned("dom00")
        batch = classify_batch(ds.features[:5], adapter, text, reg)
        for i in range(5):
            assert classify(ds.features[i], adapter, text, reg) == batch[i]

    def test_config_validation(self):
        with pytest.raises(ValueError):
            FusionConfig(beta=1.5)
        with pytest.raises(ValueError):
            FusionConfig(beta=-0.1)
        with pytest.raises(ValueError):
            FusionConfig(logit_scale=-1.0)
