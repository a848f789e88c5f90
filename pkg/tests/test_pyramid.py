import math

import numpy as np
import pytest

from regionstyle import (FeatureMap, HALF, align_params, level_stats,
                         pyramid_stats, resolve_level)

EPS = 1e-5


def brute_force_block_stats(x, gh, gw, eps):
    """Independent double-loop oracle for the block moments."""
    c, h, w = x.shape
    mean = np.zeros((c, gh, gw))
    std = np.zeros((c, gh, gw))
    for ci in range(c):
        for i in range(gh):
            r0, r1 = (i * h) // gh, ((i + 1) * h) // gh
            for j in range(gw):
                c0, c1 = (j * w) // gw, ((j + 1) * w) // gw
                vals = [x[ci, y, z] for y in range(r0, r1) for z in range(c0, c1)]
                m = sum(vals) / len(vals)
                var = sum((v - m) ** 2 for v in vals) / len(vals)
                mean[ci, i, j] = m
                std[ci, i, j] = math.sqrt(var + eps)
    return mean, std


class TestResolveLevel:
    def test_half_ceils_per_axis(self):
        assert resolve_level(HALF, 6, 8) == (3, 4)
        assert resolve_level(HALF, 5, 1) == (3, 1)
        assert resolve_level(HALF, 1, 1) == (1, 1)

    def test_single_block(self):
        assert resolve_level(1, 17, 3) == (1, 1)

    def test_fixed_level_clamps_to_crop(self):
        assert resolve_level(6, 4, 10) == (4, 6)
        assert resolve_level(6, 20, 20) == (6, 6)

    def test_rejects_bad_levels(self):
        with pytest.raises(ValueError):
            resolve_level(0, 4, 4)
        with pytest.raises(ValueError):
            resolve_level("quarter", 4, 4)


class TestLevelStats:
    def test_hand_case_single_block(self):
        v = FeatureMap(np.array([[[1.0, 3.0], [5.0, 7.0]]]))
        mean, std = level_stats(v, (1, 1), EPS)
        assert mean.data.ravel()[0] == 4.0
        # variance ((-3)^2 + (-1)^2 + 1^2 + 3^2) / 4 = 5
        np.testing.assert_allclose(std.data.ravel()[0], math.sqrt(5 + EPS),
                                   rtol=0, atol=1e-15)

    def test_single_pixel_blocks(self):
        v = FeatureMap(np.array([[[1.0, 3.0], [5.0, 7.0]]]))
        mean, std = level_stats(v, (2, 2), EPS)
        np.testing.assert_array_equal(mean.data, v.data)
        assert (std.data == math.sqrt(EPS)).all()

    def test_constant_input(self, rng):
        v = FeatureMap(np.full((2, 5, 7), 3.25))
        for grid in ((1, 1), (2, 3), (5, 7)):
            mean, std = level_stats(v, grid, EPS)
            assert (mean.data == 3.25).all()
            assert (std.data == math.sqrt(EPS)).all()

    def test_matches_brute_force_oracle(self, rng):
        for _ in range(30):
            c = int(rng.integers(1, 4))
            h = int(rng.integers(1, 12))
            w = int(rng.integers(1, 12))
            gh = int(rng.integers(1, h + 1))
            gw = int(rng.integers(1, w + 1))
            x = rng.normal(size=(c, h, w))
            mean, std = level_stats(FeatureMap(x), (gh, gw), EPS)
            om, os = brute_force_block_stats(x, gh, gw, EPS)
            np.testing.assert_allclose(mean.data, om, atol=1e-12, rtol=0)
            np.testing.assert_allclose(std.data, os, atol=1e-12, rtol=0)

    def test_grid_exceeding_dims_rejected(self):
        with pytest.raises(ValueError):
            level_stats(FeatureMap(np.zeros((1, 2, 2))), (3, 1), EPS)

    def test_std_floor_strictly_positive(self, rng):
        x = FeatureMap(rng.normal(size=(1, 6, 6)))
        _, std = level_stats(x, (3, 2), EPS)
        assert (std.data >= math.sqrt(EPS)).all()

    def test_single_block_mean_equals_global_mean(self, rng):
        from regionstyle import global_mean
        x = FeatureMap(rng.normal(size=(3, 7, 5)))
        mean, _ = level_stats(x, (1, 1), EPS)
        np.testing.assert_allclose(mean.data[:, 0, 0], global_mean(x), atol=1e-12)

    def test_masked_stats_ignore_outside_pixels(self):
        x = np.zeros((1, 2, 2))
        x[0, 0, 0] = 4.0
        x[0, 1, 1] = 999.0  # outside the mask
        mask = np.array([[1, 1], [1, 0]], dtype=np.uint8)
        mean, std = level_stats(FeatureMap(x), (1, 1), EPS, region_mask=mask)
        np.testing.assert_allclose(mean.data.ravel()[0], 4.0 / 3.0, atol=1e-12)

    def test_masked_stats_empty_block_falls_back(self):
        x = FeatureMap(np.arange(16, dtype=float).reshape(1, 4, 4))
        mask = np.zeros((4, 4), dtype=np.uint8)
        mask[:2, :2] = 1  # only the top-left block has mask pixels
        mean, _ = level_stats(x, (2, 2), EPS, region_mask=mask)
        om, _ = brute_force_block_stats(x.data, 2, 2, EPS)
        # masked block equals its masked mean, empty blocks equal plain means
        np.testing.assert_allclose(mean.data[0, 0, 0], x.data[0, :2, :2].mean())
        np.testing.assert_allclose(mean.data[0, 1, 1], om[0, 1, 1])


class TestAlignParams:
    def test_constant_grid_broadcasts(self):
        rho = FeatureMap(np.full((2, 1, 1), 4.0))
        tau = FeatureMap(np.full((2, 1, 1), 0.5))
        beta, gamma = align_params(rho, tau, 5, 5)
        assert (beta.data == 4.0).all()
        assert (gamma.data == 0.5).all()

    def test_identity_at_grid_shape(self, rng):
        rho = FeatureMap(rng.normal(size=(1, 3, 4)))
        tau = FeatureMap(rng.random((1, 3, 4)) + 0.1)
        beta, gamma = align_params(rho, tau, 3, 4)
        assert (beta.data == rho.data).all()
        assert (gamma.data == tau.data).all()

    def test_matches_resize_oracle(self):
        rho = FeatureMap(np.array([[[0.0, 10.0]]]))
        tau = FeatureMap(np.array([[[1.0, 1.0]]]))
        beta, _ = align_params(rho, tau, 1, 4)
        np.testing.assert_allclose(beta.data.ravel(), [0.0, 2.5, 7.5, 10.0], atol=0)

    def test_gamma_stays_positive(self, rng):
        tau = FeatureMap(rng.random((2, 3, 3)) * 2 + math.sqrt(EPS))
        rho = FeatureMap(rng.normal(size=(2, 3, 3)))
        for mode in ("bilinear", "nearest"):
            _, gamma = align_params(rho, tau, 9, 7, mode=mode)
            assert (gamma.data > 0).all()


class TestPyramidStats:
    def test_single_branch_single_block_is_region_moments(self, rng):
        x = rng.normal(size=(2, 6, 8))
        params = pyramid_stats(FeatureMap(x), [1], EPS, 6, 8)
        assert params.branches == 1
        want_mean = x.mean(axis=(1, 2))
        want_std = np.sqrt(x.var(axis=(1, 2)) + EPS)
        for c in range(2):
            np.testing.assert_allclose(params.aligned_means[0].data[c], want_mean[c],
                                       atol=1e-12)
            np.testing.assert_allclose(params.aligned_stds[0].data[c], want_std[c],
                                       atol=1e-12)

    def test_constant_region_all_branches_agree(self):
        x = FeatureMap(np.full((1, 6, 6), 2.5))
        params = pyramid_stats(x, [1, HALF], EPS, 6, 6)
        for k in range(2):
            assert (params.aligned_means[k].data == 2.5).all()
            assert (params.aligned_stds[k].data == math.sqrt(EPS)).all()

    def test_branches_match_brute_force(self, rng):
        x = rng.normal(size=(3, 8, 8))
        params = pyramid_stats(FeatureMap(x), [1, 4], EPS, 8, 8)
        for k, grid in enumerate(params.grids):
            om, os = brute_force_block_stats(x, grid[0], grid[1], EPS)
            np.testing.assert_allclose(params.block_means[k].data, om, atol=1e-12)
            np.testing.assert_allclose(params.block_stds[k].data, os, atol=1e-12)

    def test_channel_equivariance(self, rng):
        x = rng.normal(size=(3, 6, 6))
        perm = np.array([2, 0, 1])
        a = pyramid_stats(FeatureMap(x), [1, HALF], EPS, 6, 6)
        b = pyramid_stats(FeatureMap(x[perm]), [1, HALF], EPS, 6, 6)
        for k in range(2):
            np.testing.assert_array_equal(a.aligned_means[k].data[perm],
                                          b.aligned_means[k].data)

    def test_alignment_of_constant_crops_is_size_invariant(self):
        # same constant value in crops of different sizes: the aligned
        # parameter maps at a common target size agree (up to the last-ulp
        # wobble of averaging different block pixel counts)
        small = FeatureMap(np.full((1, 3, 4), 0.7))
        large = FeatureMap(np.full((1, 9, 5), 0.7))
        pa = pyramid_stats(small, [1, HALF], EPS, 6, 6)
        pb = pyramid_stats(large, [1, HALF], EPS, 6, 6)
        for k in range(2):
            np.testing.assert_allclose(pa.aligned_means[k].data,
                                       pb.aligned_means[k].data, atol=1e-12, rtol=0)
            assert (pa.aligned_stds[k].data == pb.aligned_stds[k].data).all()

    def test_empty_levels_rejected(self):
        with pytest.raises(ValueError):
            pyramid_stats(FeatureMap(np.zeros((1, 2, 2))), [], EPS, 2, 2)

    def test_block_partition_bookkeeping(self, rng):
        from regionstyle._ops import block_counts
        for _ in range(30):
            h = int(rng.integers(1, 20))
            w = int(rng.integers(1, 20))
            gh = int(rng.integers(1, h + 1))
            gw = int(rng.integers(1, w + 1))
            counts = block_counts(h, w, gh, gw)
            assert counts.sum() == h * w
            assert counts.min() >= 1
