"""Kernel correctness against plain-loop oracles that never use the fast paths."""

import numpy as np
import pytest

from diet.errors import DimensionError, NonFiniteError
from diet.numeric import matmul, relu_backward, relu_forward, softmax_rows
from diet.rng import stream


def matmul_oracle(a, b):
    """Triple-loop reference, independent of numpy's matmul."""
    out = np.zeros((a.shape[0], b.shape[1]))
    for i in range(a.shape[0]):
        for j in range(b.shape[1]):
            acc = 0.0
            for k in range(a.shape[1]):
                acc += a[i, k] * b[k, j]
            out[i, j] = acc
    return out


class TestMatmul:
    def test_identity(self):
        m = stream(0, "m").standard_normal((3, 3))
        assert np.allclose(matmul(np.eye(3), m), m)

    def test_hand_computed(self):
        a = np.array([[1.0, 2.0], [3.0, 4.0]])
        b = np.array([[5.0], [6.0]])
        assert np.array_equal(matmul(a, b), np.array([[17.0], [39.0]]))

    def test_against_triple_loop_oracle(self):
        a = stream(1, "a").standard_normal((7, 5))
        b = stream(1, "b").standard_normal((5, 3))
        assert np.max(np.abs(matmul(a, b) - matmul_oracle(a, b))) < 1e-12

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            matmul(np.zeros((2, 3)), np.zeros((2, 3)))

    def test_associativity(self):
        gen = stream(2, "assoc")
        for _ in range(5):
            a = gen.standard_normal((4, 6))
            b = gen.standard_normal((6, 5))
            c = gen.standard_normal((5, 3))
            left = matmul(matmul(a, b), c)
            right = matmul(a, matmul(b, c))
            denom = np.maximum(np.abs(left), 1.0)
            assert np.max(np.abs(left - right) / denom) < 1e-9

    def test_bit_identical_reruns(self):
        a = stream(3, "a").standard_normal((16, 16))
        b = stream(3, "b").standard_normal((16, 16))
        assert matmul(a, b).tobytes() == matmul(a, b).tobytes()

    def test_nonfinite_result_rejected(self):
        big = np.full((2, 2), 1e308)
        with np.errstate(over="ignore"), pytest.raises(NonFiniteError):
            matmul(big, big)


class TestSoftmaxRows:
    def test_equal_values_give_uniform(self):
        out = softmax_rows(np.full((2, 5), 3.7))
        assert np.allclose(out, 0.2, atol=1e-15)

    def test_large_logit_is_stable(self):
        out = softmax_rows(np.array([[1000.0, 0.0]]))
        assert np.isfinite(out).all()
        assert out[0, 0] == pytest.approx(1.0)
        assert out[0, 1] == pytest.approx(0.0, abs=1e-300)

    def test_rows_sum_to_one(self):
        z = stream(4, "z").standard_normal((4, 6)) * 5
        sums = softmax_rows(z).sum(axis=1)
        assert np.max(np.abs(sums - 1.0)) < 1e-12

    def test_shift_invariance(self):
        z = stream(5, "z").standard_normal((3, 7))
        shifted = softmax_rows(z + 123.456)
        assert np.max(np.abs(shifted - softmax_rows(z))) < 1e-12

    def test_rejects_nonfinite(self):
        with pytest.raises(NonFiniteError):
            softmax_rows(np.array([[np.nan, 0.0]]))


class TestRelu:
    def test_all_negative(self):
        z = -np.abs(stream(6, "z").standard_normal((3, 4))) - 0.1
        out, mask = relu_forward(z)
        assert np.array_equal(out, np.zeros_like(z))
        grad = relu_backward(np.ones_like(z), mask)
        assert np.array_equal(grad, np.zeros_like(z))

    def test_all_positive_is_identity(self):
        z = np.abs(stream(7, "z").standard_normal((3, 4))) + 0.1
        out, mask = relu_forward(z)
        assert np.array_equal(out, z)
        g = stream(7, "g").standard_normal(z.shape)
        assert np.array_equal(relu_backward(g, mask), g)

    def test_shape_mismatch(self):
        with pytest.raises(DimensionError):
            relu_backward(np.zeros((2, 2)), np.zeros((3, 2)))

    def test_finite_difference_of_composite(self):
        # d/dW of sum(relu(x @ W.T)) at non-kink points, central differences
        gen = stream(8, "fd")
        x = gen.standard_normal((4, 5))
        w = gen.standard_normal((3, 5))
        pre = x @ w.T
        assert np.min(np.abs(pre)) > 1e-4  # stay away from kinks

        def loss(weights):
            out, _ = relu_forward(x @ weights.T)
            return float(out.sum())

        out, mask = relu_forward(pre)
        analytic = relu_backward(np.ones_like(pre), mask).T @ x
        h = 1e-6
        for i in range(w.shape[0]):
            for j in range(w.shape[1]):
                wp, wm = w.copy(), w.copy()
                wp[i, j] += h
                wm[i, j] -= h
                fd = (loss(wp) - loss(wm)) / (2 * h)
                denom = max(abs(fd), abs(analytic[i, j]), 1e-8)
                assert abs(fd - analytic[i, j]) / denom < 1e-6
