import math

import numpy as np
import pytest

from regionstyle import (FeatureMap, RegionNotFoundError, SegMask, cycle_l1,
                         feature_matching, hinge_adversarial, histogram_match,
                         log_adversarial, makeup_loss, perceptual_distance,
                         pfdm)

BIN = 1.0 / 256.0


def _const(c, h, w, value):
    return FeatureMap.full(c, h, w, value)


class TestHistogramMatch:
    def test_constant_to_constant_exact(self):
        src = _const(1, 4, 4, 0.1)
        ref = _const(1, 4, 4, 0.8)
        mask = np.ones((4, 4), dtype=bool)
        out = histogram_match(src, ref, mask, mask)
        assert (out.data == 0.8).all()

    def test_identical_distribution_fixed_point(self, rng):
        vals = rng.random((1, 6, 6))
        src = FeatureMap(vals)
        ref = FeatureMap(vals.copy())
        mask = np.ones((6, 6), dtype=bool)
        out = histogram_match(src, ref, mask, mask)
        assert np.abs(out.data - src.data).max() <= BIN

    def test_outside_mask_untouched_bitwise(self, rng):
        src = FeatureMap(rng.random((3, 8, 8)))
        ref = FeatureMap(rng.random((3, 8, 8)))
        src_mask = np.zeros((8, 8), dtype=bool)
        src_mask[2:6, 2:6] = True
        ref_mask = np.ones((8, 8), dtype=bool)
        out = histogram_match(src, ref, src_mask, ref_mask)
        assert (out.data[:, ~src_mask] == src.data[:, ~src_mask]).all()

    def test_matches_sort_based_pairing(self, rng):
        # equal pixel counts: sorted matched values pair with sorted
        # reference values within one bin width
        n = 64
        src_vals = np.linspace(0.0, 1.0, n)
        ref_vals = np.linspace(0.5, 1.0, n)
        rng.shuffle(src_vals)
        rng.shuffle(ref_vals)
        src = FeatureMap(src_vals.reshape(1, 8, 8))
        ref = FeatureMap(ref_vals.reshape(1, 8, 8))
        mask = np.ones((8, 8), dtype=bool)
        out = histogram_match(src, ref, mask, mask)
        got = np.sort(out.data[0][mask])
        want = np.sort(ref_vals)  # optimal-transport pairing on sorted lists
        assert np.abs(got - want).max() <= BIN

    def test_equal_count_sorted_match_random(self, rng):
        for _ in range(10):
            src = FeatureMap(rng.random((2, 5, 7)))
            ref = FeatureMap(rng.random((2, 5, 7)))
            mask = np.ones((5, 7), dtype=bool)
            out = histogram_match(src, ref, mask, mask)
            for c in range(2):
                got = np.sort(out.data[c][mask])
                want = np.sort(ref.data[c][mask])
                assert np.abs(got - want).max() <= BIN

    def test_empty_mask_rejected(self, rng):
        src = FeatureMap(rng.random((1, 4, 4)))
        with pytest.raises(ValueError):
            histogram_match(src, src, np.zeros((4, 4), dtype=bool),
                            np.ones((4, 4), dtype=bool))


class TestMakeupLoss:
    def test_zero_at_pseudo_ground_truth(self, rng):
        x_s = FeatureMap(rng.random((3, 6, 6)))
        x_r = FeatureMap(rng.random((3, 6, 6)))
        ms = np.zeros((6, 6), dtype=bool)
        ms[1:4, 1:4] = True
        mr = np.zeros((6, 6), dtype=bool)
        mr[2:6, 2:6] = True
        hm_fwd = histogram_match(x_s, x_r, ms, mr)
        hm_rev = histogram_match(x_r, x_s, mr, ms)
        loss = makeup_loss(hm_fwd, hm_rev, x_s, x_r, [(ms, mr)])
        assert loss == 0.0

    def test_single_pixel_arithmetic(self):
        x_s = _const(1, 1, 1, 0.1)
        x_r = _const(1, 1, 1, 0.1)  # HM target is 0.1
        gen = _const(1, 1, 1, 0.4)
        mask = np.ones((1, 1), dtype=bool)
        loss = makeup_loss(gen, x_r, x_s, x_r, [(mask, mask)])
        np.testing.assert_allclose(loss, 0.3, atol=1e-12)

    def test_homogeneous_in_residual(self, rng):
        x_s = FeatureMap(rng.random((1, 4, 4)))
        x_r = FeatureMap(rng.random((1, 4, 4)))
        mask = np.ones((4, 4), dtype=bool)
        hm_fwd = histogram_match(x_s, x_r, mask, mask)
        hm_rev = histogram_match(x_r, x_s, mask, mask)
        delta = rng.random((1, 4, 4))
        for lam in (1.0, 2.5):
            gen_f = FeatureMap(hm_fwd.data + lam * delta)
            loss = makeup_loss(gen_f, hm_rev, x_s, x_r, [(mask, mask)])
            np.testing.assert_allclose(loss, lam * np.sqrt((delta ** 2).sum()),
                                       rtol=1e-12)

    def test_empty_region_list_rejected(self, rng):
        x = FeatureMap(rng.random((1, 2, 2)))
        with pytest.raises(ValueError):
            makeup_loss(x, x, x, x, [])


class TestCycleL1:
    def test_zero_at_equal(self, rng):
        a = FeatureMap(rng.random((2, 3, 3)))
        assert cycle_l1(a, a) == 0.0

    def test_symmetry(self, rng):
        a = FeatureMap(rng.random((2, 3, 3)))
        b = FeatureMap(rng.random((2, 3, 3)))
        assert cycle_l1(a, b) == cycle_l1(b, a)

    def test_hand_value(self):
        assert cycle_l1(_const(1, 2, 2, 0.0), _const(1, 2, 2, 0.5)) == 0.5

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValueError):
            cycle_l1(_const(1, 2, 2, 0.0), _const(1, 3, 2, 0.0))


class TestPerceptual:
    def test_zero_at_identical(self, rng):
        feats = [FeatureMap(rng.random((2, 3, 3))) for _ in range(3)]
        assert perceptual_distance(feats, feats) == 0.0
        assert perceptual_distance(feats, feats, norm="l1") == 0.0

    def test_single_layer_constant_difference(self):
        # documented reduction: sqrt(mean(d^2)) per layer for the L2 form
        a = _const(1, 2, 2, 0.0)
        b = _const(1, 2, 2, 0.3)
        np.testing.assert_allclose(perceptual_distance([a], [b]),
                                   math.sqrt((4 * 0.3 ** 2) / 4), rtol=1e-12)
        np.testing.assert_allclose(perceptual_distance([a], [b], norm="l1"),
                                   0.3, rtol=1e-12)

    def test_empty_lists(self):
        assert perceptual_distance([], []) == 0.0

    def test_mismatch_rejected(self, rng):
        a = [FeatureMap(rng.random((1, 2, 2)))]
        with pytest.raises(ValueError):
            perceptual_distance(a, [])
        with pytest.raises(ValueError):
            perceptual_distance(a, [FeatureMap(rng.random((1, 3, 2)))])


class TestFeatureMatching:
    def test_zero_at_identical(self, rng):
        nest = [[FeatureMap(rng.random((1, 2, 2))) for _ in range(2)]]
        assert feature_matching(nest, nest) == 0.0

    def test_scaled_l1_hand_value(self):
        real = [[_const(1, 2, 2, 0.2)]]
        fake = [[_const(1, 2, 2, 0.0)]]
        np.testing.assert_allclose(feature_matching(real, fake), 0.2, rtol=1e-12)

    def test_additive_over_discriminators(self, rng):
        d1r = [FeatureMap(rng.random((1, 2, 2)))]
        d1f = [FeatureMap(rng.random((1, 2, 2)))]
        d2r = [FeatureMap(rng.random((1, 3, 3)))]
        d2f = [FeatureMap(rng.random((1, 3, 3)))]
        both = feature_matching([d1r, d2r], [d1f, d2f])
        np.testing.assert_allclose(
            both,
            feature_matching([d1r], [d1f]) + feature_matching([d2r], [d2f]),
            rtol=1e-12)

    def test_nesting_mismatch_rejected(self, rng):
        nest = [[FeatureMap(rng.random((1, 2, 2)))]]
        with pytest.raises(ValueError):
            feature_matching(nest, [])


class TestAdversarial:
    def test_hinge_satisfied_margin(self):
        loss_d, _ = hinge_adversarial(_const(1, 2, 2, 1.0), _const(1, 2, 2, -1.0))
        assert loss_d == 0.0

    def test_hinge_generator_zero_at_zero_scores(self):
        _, loss_g = hinge_adversarial(_const(1, 2, 2, 1.0), _const(1, 2, 2, 0.0))
        assert loss_g == 0.0

    def test_hinge_hand_value(self):
        loss_d, loss_g = hinge_adversarial(_const(1, 2, 2, 0.5), _const(1, 2, 2, 0.5))
        np.testing.assert_allclose(loss_d, 2.0, rtol=1e-12)
        np.testing.assert_allclose(loss_g, -0.5, rtol=1e-12)

    def test_log_near_perfect_discriminator(self):
        loss_d, _ = log_adversarial(_const(1, 2, 2, 1.0 - 1e-7),
                                    _const(1, 2, 2, 1e-7))
        assert loss_d < 1e-5

    def test_log_generator_half(self):
        _, loss_g = log_adversarial(_const(1, 2, 2, 0.9), _const(1, 2, 2, 0.5))
        np.testing.assert_allclose(loss_g, math.log(2.0), rtol=1e-12)

    def test_log_clamps_boundary_inputs(self):
        loss_d, loss_g = log_adversarial(_const(1, 2, 2, 1.0), _const(1, 2, 2, 0.0))
        assert np.isfinite(loss_d) and np.isfinite(loss_g)

    def test_log_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            log_adversarial(_const(1, 2, 2, 1.5), _const(1, 2, 2, 0.5))


def _two_region_masks(h, w):
    labels = np.zeros((h, w), dtype=np.uint8)
    labels[:, : w // 2] = 1
    labels[:, w // 2:] = 2
    return SegMask(labels)


def brute_force_pfdm(img_a, img_b, mask_a, mask_b, regions, bins=32):
    """Independent double-loop histogram oracle."""
    per_region = {}
    counts = {}
    for rid in regions:
        pa = img_a.data[:, mask_a.labels == rid]
        pb = img_b.data[:, mask_b.labels == rid]
        counts[rid] = (pa.shape[1], pb.shape[1])
        dist = 0.0
        for c in range(img_a.channels):
            ha = [0] * bins
            hb = [0] * bins
            for val in pa[c]:
                ha[min(int(val * bins), bins - 1)] += 1
            for val in pb[c]:
                hb[min(int(val * bins), bins - 1)] += 1
            dist += sum(abs(ha[i] / len(pa[c]) - hb[i] / len(pb[c]))
                        for i in range(bins))
        per_region[rid] = dist / img_a.channels
    tot_a = sum(ca for ca, _ in counts.values())
    tot_b = sum(cb for _, cb in counts.values())
    return sum(0.5 * (counts[r][0] / tot_a + counts[r][1] / tot_b) * per_region[r]
               for r in regions)


class TestPfdm:
    def test_identical_inputs_zero(self, rng):
        img = FeatureMap(rng.random((3, 6, 6)))
        mask = _two_region_masks(6, 6)
        assert pfdm(img, img, mask, mask) == 0.0

    def test_disjoint_single_colors_give_two(self):
        mask = _two_region_masks(4, 4)
        a = _const(3, 4, 4, 0.1)
        b = _const(3, 4, 4, 0.9)
        np.testing.assert_allclose(pfdm(a, b, mask, mask), 2.0, rtol=0)

    def test_symmetry(self, rng):
        a = FeatureMap(rng.random((3, 6, 8)))
        b = FeatureMap(rng.random((3, 6, 8)))
        mask = _two_region_masks(6, 8)
        np.testing.assert_allclose(pfdm(a, b, mask, mask),
                                   pfdm(b, a, mask, mask), atol=1e-15)

    def test_permutation_invariance_within_regions(self, rng):
        a = rng.random((3, 4, 6))
        mask = _two_region_masks(4, 6)
        b = a.copy()
        for rid in (1, 2):
            sel = mask.labels == rid
            vals = b[:, sel]
            perm = rng.permutation(vals.shape[1])
            b[:, sel] = vals[:, perm]
        ref = FeatureMap(rng.random((3, 4, 6)))
        np.testing.assert_allclose(
            pfdm(FeatureMap(a), ref, mask, mask),
            pfdm(FeatureMap(b), ref, mask, mask), atol=1e-12)

    def test_matches_brute_force_oracle(self, rng):
        for _ in range(5):
            a = FeatureMap(rng.random((3, 6, 8)))
            b = FeatureMap(rng.random((3, 6, 8)))
            mask = _two_region_masks(6, 8)
            got = pfdm(a, b, mask, mask)
            want = brute_force_pfdm(a, b, mask, mask, [1, 2])
            np.testing.assert_allclose(got, want, atol=1e-12)

    def test_missing_region_rejected(self, rng):
        a = FeatureMap(rng.random((3, 4, 4)))
        mask = _two_region_masks(4, 4)
        only_one = SegMask(np.where(mask.labels == 2, 0, mask.labels))
        with pytest.raises(RegionNotFoundError):
            pfdm(a, a, mask, only_one, regions=[1, 2])
