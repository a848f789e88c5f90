import math

import numpy as np
import pytest

from regionstyle import (FeatureMap, concat_channels, conv2d_3x3, global_mean,
                         resize_bilinear, resize_nearest, softmax_channels)


class TestFeatureMap:
    def test_shape_and_properties(self):
        fm = FeatureMap(np.zeros((2, 3, 4)))
        assert (fm.channels, fm.height, fm.width) == (2, 3, 4)
        assert fm.shape == (2, 3, 4)

    def test_rejects_wrong_rank(self):
        with pytest.raises(ValueError):
            FeatureMap(np.zeros((3, 4)))

    def test_rejects_empty_axis(self):
        with pytest.raises(ValueError):
            FeatureMap(np.zeros((0, 3, 4)))

    def test_rejects_non_finite(self):
        bad = np.zeros((1, 2, 2))
        bad[0, 0, 0] = np.nan
        with pytest.raises(ValueError):
            FeatureMap(bad)
        bad[0, 0, 0] = np.inf
        with pytest.raises(ValueError):
            FeatureMap(bad)

    def test_data_is_immutable_and_decoupled(self):
        src = np.zeros((1, 2, 2))
        fm = FeatureMap(src)
        src[0, 0, 0] = 7.0
        assert fm.data[0, 0, 0] == 0.0
        with pytest.raises(ValueError):
            fm.data[0, 0, 0] = 1.0


class TestResizeBilinear:
    def test_constant_extension_from_single_pixel(self):
        out = resize_bilinear(FeatureMap(np.full((1, 1, 1), 5.0)), 3, 3)
        assert (out.data == 5.0).all()

    def test_identity_at_same_shape_is_bitwise(self, rng):
        fm = FeatureMap(rng.normal(size=(3, 5, 7)))
        out = resize_bilinear(fm, 5, 7)
        assert (out.data == fm.data).all()

    def test_hand_evaluated_axis_interpolation(self):
        # coordinate formula s = (i + 0.5) * (2/4) - 0.5 over [0, 10]
        # gives samples at s = {0, 0.25, 0.75, 1} (after clamping)
        out = resize_bilinear(FeatureMap(np.array([[[0.0, 10.0]]])), 1, 4)
        np.testing.assert_allclose(out.data.ravel(), [0.0, 2.5, 7.5, 10.0],
                                   rtol=0, atol=0)

    def test_constant_maps_stay_exactly_constant(self, rng):
        for value in (0.1, -3.7, 1e6):
            fm = FeatureMap(np.full((2, 3, 5), value))
            out = resize_bilinear(fm, 7, 11)
            assert (out.data == value).all()

    def test_rejects_bad_dims(self):
        fm = FeatureMap(np.zeros((1, 2, 2)))
        with pytest.raises(ValueError):
            resize_bilinear(fm, 0, 3)

    def test_values_stay_within_input_range(self, rng):
        fm = FeatureMap(rng.normal(size=(2, 6, 6)))
        out = resize_bilinear(fm, 13, 4)
        assert out.data.max() <= fm.data.max() + 1e-12
        assert out.data.min() >= fm.data.min() - 1e-12


class TestResizeNearest:
    def test_identity_at_same_shape(self, rng):
        fm = FeatureMap(rng.normal(size=(2, 4, 4)))
        assert (resize_nearest(fm, 4, 4).data == fm.data).all()

    def test_upsample_duplicates_values(self):
        fm = FeatureMap(np.array([[[1.0, 2.0]]]))
        out = resize_nearest(fm, 1, 4)
        np.testing.assert_array_equal(out.data.ravel(), [1.0, 1.0, 2.0, 2.0])

    def test_output_values_come_from_input(self, rng):
        fm = FeatureMap(rng.normal(size=(1, 5, 5)))
        out = resize_nearest(fm, 8, 3)
        assert np.isin(out.data, fm.data).all()


class TestSoftmaxChannels:
    def test_uniform_for_all_zero(self):
        out = softmax_channels(FeatureMap(np.zeros((3, 1, 1))))
        np.testing.assert_allclose(out.data.ravel(), [1 / 3] * 3, atol=1e-15)

    def test_closed_form_two_channel(self):
        fm = FeatureMap(np.array([[[0.0]], [[math.log(3.0)]]]))
        np.testing.assert_allclose(softmax_channels(fm).data.ravel(),
                                   [0.25, 0.75], atol=1e-15)

    def test_shift_invariance(self, rng):
        x = rng.normal(size=(4, 3, 3))
        base = softmax_channels(FeatureMap(x))
        shifted = softmax_channels(FeatureMap(x + 17.25))
        np.testing.assert_allclose(shifted.data, base.data, atol=1e-12)

    def test_simplex_per_location(self, rng):
        out = softmax_channels(FeatureMap(rng.normal(size=(5, 4, 6)) * 10))
        assert (out.data >= 0).all()
        np.testing.assert_allclose(out.data.sum(axis=0), 1.0, atol=1e-12)


class TestConv3x3:
    def test_zero_kernel_gives_bias(self, rng):
        x = FeatureMap(rng.normal(size=(2, 4, 4)))
        out = conv2d_3x3(x, np.zeros((3, 2, 3, 3)), np.array([1.0, -2.0, 0.5]))
        for k, b in enumerate((1.0, -2.0, 0.5)):
            assert (out.data[k] == b).all()

    def test_identity_center_tap(self, rng):
        x = FeatureMap(rng.normal(size=(1, 5, 5)))
        kern = np.zeros((1, 1, 3, 3))
        kern[0, 0, 1, 1] = 1.0
        out = conv2d_3x3(x, kern)
        np.testing.assert_array_equal(out.data, x.data)

    def test_hand_convolution_with_zero_padding(self):
        # 2x2 ones, all-ones kernel: every window covers exactly the four
        # ones, everything else is padding
        x = FeatureMap(np.ones((1, 2, 2)))
        out = conv2d_3x3(x, np.ones((1, 1, 3, 3)))
        assert (out.data == 4.0).all()

    def test_channel_mismatch_rejected(self):
        x = FeatureMap(np.zeros((2, 3, 3)))
        with pytest.raises(ValueError):
            conv2d_3x3(x, np.zeros((1, 3, 3, 3)))

    def test_linearity_in_input(self, rng):
        kern = rng.normal(size=(2, 3, 3, 3))
        bias = rng.normal(size=2)
        x = rng.normal(size=(3, 5, 5))
        y = rng.normal(size=(3, 5, 5))
        a, b = 1.7, -0.3
        lhs = conv2d_3x3(FeatureMap(a * x + b * y), kern, bias).data
        rhs = (a * conv2d_3x3(FeatureMap(x), kern, bias).data
               + b * conv2d_3x3(FeatureMap(y), kern, bias).data
               - (a + b - 1) * bias[:, None, None])
        np.testing.assert_allclose(lhs, rhs, atol=1e-10)


class TestConcatChannels:
    def test_order_and_count(self, rng):
        a = FeatureMap(rng.normal(size=(2, 3, 3)))
        b = FeatureMap(rng.normal(size=(3, 3, 3)))
        out = concat_channels(a, b)
        assert out.channels == 5
        np.testing.assert_array_equal(out.data[:2], a.data)
        np.testing.assert_array_equal(out.data[2:], b.data)

    def test_order_sensitivity(self, rng):
        a = FeatureMap(rng.normal(size=(1, 2, 2)))
        b = FeatureMap(rng.normal(size=(1, 2, 2)))
        assert (concat_channels(a, b).data != concat_channels(b, a).data).any()

    def test_spatial_mismatch_rejected(self):
        with pytest.raises(ValueError):
            concat_channels(FeatureMap(np.zeros((1, 2, 2))),
                            FeatureMap(np.zeros((1, 3, 2))))


class TestGlobalMean:
    def test_constant_map(self):
        fm = FeatureMap(np.full((3, 2, 5), -1.25))
        np.testing.assert_array_equal(global_mean(fm), [-1.25] * 3)

    def test_hand_case(self):
        fm = FeatureMap(np.array([[[1.0, 3.0], [5.0, 7.0]]]))
        np.testing.assert_allclose(global_mean(fm), [4.0], atol=0)

    def test_permutation_invariance(self, rng):
        x = rng.normal(size=(2, 4, 4))
        perm = rng.permutation(16)
        shuffled = x.reshape(2, -1)[:, perm].reshape(2, 4, 4)
        np.testing.assert_allclose(global_mean(FeatureMap(x)),
                                   global_mean(FeatureMap(shuffled)), atol=1e-15)


def test_determinism_bitwise(rng):
    x = rng.normal(size=(3, 6, 7))
    kern = rng.normal(size=(2, 3, 3, 3))
    bias = rng.normal(size=2)
    fm = FeatureMap(x)
    for op in (lambda: resize_bilinear(fm, 9, 5).data,
               lambda: softmax_channels(fm).data,
               lambda: conv2d_3x3(fm, kern, bias).data,
               lambda: global_mean(fm)):
        assert (op() == op()).all()
