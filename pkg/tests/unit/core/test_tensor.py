"""Tests for the dense-array kernel."""

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from core.exceptions import DimensionError, NumericError
from core.tensor import (
    LayerRecord,
    activate,
    conv2d,
    conv_output_extent,
    ensure_finite,
    layer_adjoint,
    layer_input_adjoint,
    matmul,
    maxpool2d,
    maxpool2d_adjoint,
    relu,
    relu_prime,
)


def naive_conv(x, weight, stride, pad):
    x = np.pad(x, ((0, 0), (pad, pad), (pad, pad)))
    out_c, _, kh, kw = weight.shape
    out_h = (x.shape[1] - kh) // stride + 1
    out_w = (x.shape[2] - kw) // stride + 1
    out = np.zeros((out_c, out_h, out_w))
    for o in range(out_c):
        for i in range(out_h):
            for j in range(out_w):
                window = x[:, i * stride : i * stride + kh, j * stride : j * stride + kw]
                out[o, i, j] = np.sum(window * weight[o])
    return out


def conv_record(x, weight, bias, pad, pool):
    a = conv2d(x, weight, 1, pad) + bias[:, None, None]
    z = activate(a, "relu")
    pooled, pool_record = (z, None) if pool is None else maxpool2d(z, pool, pool)
    return LayerRecord(
        kind="conv",
        x=x,
        a=a,
        z=z,
        pooled=pooled,
        activation="relu",
        weight_shape=weight.shape,
        input_shape=x.shape,
        pad=pad,
        pool_record=pool_record,
    )


class TestMatmul:
    """Test cases for matmul."""

    def test_identity(self):
        """The identity leaves the other operand unchanged."""
        b = np.array([[1.0, 2.0], [3.0, 4.0]])
        assert_array_equal(matmul(np.eye(2), b), b)

    def test_orthogonal_rows(self):
        """An orthogonal row and column give zero."""
        assert_array_equal(matmul(np.array([[1.0, 0.0]]), np.array([[0.0], [5.0]])), [[0.0]])

    def test_matches_triple_loop(self):
        """A random product equals the naive triple loop."""
        rng = np.random.default_rng(0)
        a, b = rng.normal(size=(3, 4)), rng.normal(size=(4, 2))
        expected = np.zeros((3, 2))
        for i in range(3):
            for j in range(2):
                for k in range(4):
                    expected[i, j] += a[i, k] * b[k, j]
        assert_allclose(matmul(a, b), expected, rtol=1e-12)

    def test_shape_mismatch(self):
        """Inner dimensions must agree."""
        with pytest.raises(DimensionError):
            matmul(np.ones((2, 3)), np.ones((2, 3)))


class TestConv2d:
    """Test cases for convolution and its output grid."""

    def test_identity_kernel(self):
        """A 1×1 kernel of one is the identity map."""
        x = np.random.default_rng(1).normal(size=(1, 5, 4))
        assert_array_equal(conv2d(x, np.ones((1, 1, 1, 1))), x)

    def test_zero_kernel(self):
        """An all-zero kernel gives an all-zero output."""
        x = np.random.default_rng(2).normal(size=(2, 4, 4))
        assert not np.any(conv2d(x, np.zeros((3, 2, 3, 3))))

    def test_matches_direct_summation(self):
        """1×3×3 input with a 2×2 kernel equals per-window sums."""
        x = np.arange(9.0).reshape(1, 3, 3)
        weight = np.array([[[[1.0, -1.0], [0.5, 2.0]]]])
        assert_allclose(conv2d(x, weight), naive_conv(x, weight, 1, 0))

    @pytest.mark.parametrize("stride,pad", [(1, 1), (2, 0), (2, 1)])
    def test_strided_padded(self, stride, pad):
        """Stride and padding follow the direct oracle."""
        rng = np.random.default_rng(3)
        x, weight = rng.normal(size=(2, 7, 7)), rng.normal(size=(3, 2, 3, 3))
        assert_allclose(conv2d(x, weight, stride, pad), naive_conv(x, weight, stride, pad), atol=1e-12)

    def test_non_integral_extent(self):
        """A grid that does not tile exactly is rejected."""
        with pytest.raises(DimensionError):
            conv_output_extent(6, 3, 2, 0)
        with pytest.raises(DimensionError):
            conv2d(np.ones((1, 6, 6)), np.ones((1, 1, 3, 3)), stride=2)

    def test_channel_mismatch(self):
        """Kernel input channels must match the input."""
        with pytest.raises(DimensionError):
            conv2d(np.ones((2, 4, 4)), np.ones((1, 3, 2, 2)))


class TestMaxPool:
    """Test cases for max-pooling and its routing record."""

    def test_constant_input_picks_first_cell(self):
        """Ties go to the first cell of each window."""
        out, record = maxpool2d(np.full((1, 4, 4), 2.0), 2, 2)
        assert_array_equal(out, np.full((1, 2, 2), 2.0))
        assert_array_equal(record.rows, [[[0, 0], [2, 2]]])
        assert_array_equal(record.cols, [[[0, 2], [0, 2]]])

    def test_increasing_raster_picks_bottom_right(self):
        """With a strictly increasing raster the bottom-right cell wins."""
        _, record = maxpool2d(np.arange(16.0).reshape(1, 4, 4), 2, 2)
        assert_array_equal(record.rows, [[[1, 1], [3, 3]]])
        assert_array_equal(record.cols, [[[1, 3], [1, 3]]])

    def test_matches_exhaustive_scan(self):
        """A random 4×4 map equals the exhaustive window maximum."""
        x = np.random.default_rng(4).normal(size=(2, 4, 4))
        out, _ = maxpool2d(x, 2, 2)
        expected = np.array(
            [[[x[c, i : i + 2, j : j + 2].max() for j in (0, 2)] for i in (0, 2)] for c in range(2)]
        )
        assert_array_equal(out, expected)

    def test_window_too_large(self):
        """A window larger than the map is rejected."""
        with pytest.raises(DimensionError):
            maxpool2d(np.ones((1, 2, 2)), 3, 1)

    def test_adjoint_routes_to_winners(self):
        """Upstream values land on the winning cells only."""
        x = np.arange(16.0).reshape(1, 4, 4)
        _, record = maxpool2d(x, 2, 2)
        grad = maxpool2d_adjoint(np.array([[[1.0, 2.0], [3.0, 4.0]]]), record)
        assert grad[0, 1, 1] == 1.0 and grad[0, 3, 3] == 4.0
        assert grad.sum() == 10.0


class TestActivations:
    """Test cases for ReLU and its derivative."""

    def test_sign_cases(self):
        """ReLU zeroes non-positive values and its derivative is 0 at 0."""
        a = np.array([-1.0, 0.0, 2.0])
        assert_array_equal(relu(a), [0.0, 0.0, 2.0])
        assert_array_equal(relu_prime(a), [0.0, 0.0, 1.0])

    def test_positive_identity(self):
        """All-positive inputs pass through with unit derivative."""
        a = np.array([0.5, 1.0, 3.0])
        assert_array_equal(relu(a), a)
        assert_array_equal(relu_prime(a), np.ones(3))

    def test_linear_copies(self):
        """The linear activation returns a copy."""
        a = np.array([-1.0, 2.0])
        out = activate(a, "linear")
        assert_array_equal(out, a)
        assert out is not a


class TestLayerAdjoint:
    """Test cases for single-layer weight and input adjoints."""

    def test_dense_outer_product(self):
        """upstream=[1,0], x=[2,3] gives [[2,3],[0,0]]."""
        record = LayerRecord(
            kind="dense",
            x=np.array([2.0, 3.0]),
            a=np.array([1.0, 1.0]),
            z=np.array([1.0, 1.0]),
            pooled=np.array([1.0, 1.0]),
            activation="relu",
            weight_shape=(2, 2),
            input_shape=(1,),
        )
        grad = layer_adjoint(np.array([1.0, 0.0]), record)
        assert_array_equal(grad.weight, [[2.0, 3.0], [0.0, 0.0]])
        assert grad.bias is None

    def test_zero_upstream(self):
        """A zero upstream gives zero gradients."""
        rng = np.random.default_rng(5)
        x, weight, bias = rng.normal(size=(1, 5, 5)), rng.normal(size=(2, 1, 2, 2)), rng.normal(size=2)
        record = conv_record(x, weight, bias, 0, 2)
        grad = layer_adjoint(np.zeros_like(record.pooled), record)
        assert not np.any(grad.weight) and not np.any(grad.bias)

    def test_shape_mismatch(self):
        """The upstream must match the layer output."""
        rng = np.random.default_rng(6)
        record = conv_record(rng.normal(size=(1, 4, 4)), rng.normal(size=(1, 1, 2, 2)), np.zeros(1), 0, None)
        with pytest.raises(DimensionError):
            layer_adjoint(np.ones((1, 2, 2)), record)

    @pytest.mark.parametrize("pad,pool", [(0, None), (1, 2), (0, 2)])
    def test_conv_matches_finite_differences(self, pad, pool):
        """Conv(+pool) weight gradients equal central differences of ⟨upstream, output⟩."""
        rng = np.random.default_rng(7 + pad)
        x = rng.normal(size=(2, 5, 5))
        weight = rng.normal(size=(2, 2, 2, 2))
        bias = rng.normal(scale=0.1, size=2)
        record = conv_record(x, weight, bias, pad, pool)
        upstream = rng.normal(size=record.pooled.shape)
        grad = layer_adjoint(upstream, record)

        def functional(w):
            return float(np.sum(upstream * conv_record(x, w, bias, pad, pool).pooled))

        numeric = np.zeros_like(weight)
        h = 1e-5
        for index in np.ndindex(weight.shape):
            plus, minus = weight.copy(), weight.copy()
            plus[index] += h
            minus[index] -= h
            numeric[index] = (functional(plus) - functional(minus)) / (2 * h)
        assert np.linalg.norm(grad.weight - numeric) / np.linalg.norm(numeric) < 1e-6

    def test_conv_input_adjoint_matches_transpose(self):
        """⟨upstream, J·v⟩ equals ⟨Jᵀ·upstream, v⟩ on a linear conv layer."""
        rng = np.random.default_rng(8)
        x, weight = rng.normal(size=(2, 7, 7)), rng.normal(size=(3, 2, 3, 3))
        a = conv2d(x, weight, 2, 1)
        record = LayerRecord(
            kind="conv", x=x, a=a, z=a, pooled=a, activation="linear",
            weight_shape=weight.shape, input_shape=x.shape, stride=2, pad=1,
        )
        upstream, v = rng.normal(size=a.shape), rng.normal(size=x.shape)
        left = np.sum(upstream * conv2d(v, weight, 2, 1))
        right = np.sum(layer_input_adjoint(upstream, record, weight) * v)
        assert_allclose(left, right, rtol=1e-10)


class TestEnsureFinite:
    """Test cases for the finiteness guard."""

    def test_rejects_nan(self):
        """NaN values raise NumericError."""
        with pytest.raises(NumericError):
            ensure_finite(np.array([1.0, np.nan]), "scores")

    def test_logs_offending_count(self, caplog):
        """The error log names how many entries are not finite."""
        with caplog.at_level("ERROR", logger="core.tensor"):
            with pytest.raises(NumericError):
                ensure_finite(np.array([np.inf, 1.0, np.nan]), "layer0.weight")
        assert "2 non-finite values in layer0.weight" in caplog.text

    def test_passes_finite(self):
        """Finite values are returned unchanged."""
        value = np.array([1.0, 2.0])
        assert ensure_finite(value, "scores") is value
