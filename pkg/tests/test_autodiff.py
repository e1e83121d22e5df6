import math

import numpy as np
import pytest

from deepbass import autodiff as ad
from deepbass.errors import DimensionError, ParameterError
from gradcheck import numeric_gradient


def t64(data, requires_grad=False):
    return ad.Tensor(np.asarray(data, dtype=np.float64), requires_grad=requires_grad)


def scalar_loss(out):
    """sum(out) as the canonical scalar head for gradient checks."""
    return float(np.sum(out))


class TestMatmul:
    def test_identity(self):
        a = t64([[1.0, 0.0], [0.0, 1.0]])
        b = t64([[3.0, 4.0], [5.0, 6.0]])
        out = ad.matmul(a, b)
        np.testing.assert_array_equal(out.data, [[3.0, 4.0], [5.0, 6.0]])

    def test_hand_computed(self):
        out = ad.matmul(t64([[1.0, 2.0]]), t64([[3.0], [4.0]]))
        np.testing.assert_allclose(out.data, [[11.0]])

    def test_gradient_matches_finite_differences(self):
        a = t64([[1.0, 2.0]], requires_grad=True)
        b = t64([[3.0], [4.0]])
        tape = ad.Tape()
        out = ad.matmul(a, b, tape)
        out.grad = np.ones_like(out.data)
        tape._entries[-1]()
        np.testing.assert_allclose(a.grad, [[3.0, 4.0]])
        num = numeric_gradient(lambda x: scalar_loss(x @ b.data), a.data)
        np.testing.assert_allclose(a.grad, num, atol=1e-6)

    def test_shape_mismatch_mentions_both_shapes(self):
        with pytest.raises(DimensionError, match=r"\(2, 3\).*\(2, 2\)"):
            ad.matmul(t64(np.ones((2, 3))), t64(np.ones((2, 2))))


class TestConv2d:
    def test_zero_input_gives_zero_output(self):
        rng = np.random.default_rng(0)
        x = t64(np.zeros((5, 5, 2)))
        k = t64(rng.standard_normal((3, 3, 2, 3)))
        b = t64(np.zeros(3))
        out = ad.conv2d(x, k, b)
        assert out.shape == (5, 5, 3)
        np.testing.assert_array_equal(out.data, 0.0)

    def test_center_tap_with_bias(self):
        x = t64(np.full((1, 1, 1), 3.0))
        k = np.zeros((3, 3, 1, 1))
        k[1, 1, 0, 0] = 2.0
        out = ad.conv2d(x, t64(k), t64([1.0]))
        np.testing.assert_allclose(out.data, [[[7.0]]])

    def test_channel_mismatch(self):
        with pytest.raises(DimensionError, match="channels"):
            ad.conv2d(t64(np.ones((4, 4, 2))), t64(np.ones((3, 3, 3, 1))), t64([0.0]))

    def test_gradients_match_finite_differences(self):
        rng = np.random.default_rng(42)
        x0 = rng.standard_normal((5, 5, 2))
        k0 = rng.standard_normal((3, 3, 2, 3)) * 0.5
        b0 = rng.standard_normal(3)

        x, k, b = t64(x0, True), t64(k0, True), t64(b0, True)
        tape = ad.Tape()
        out = ad.conv2d(x, k, b, tape)
        loss = _sum_all(out, tape)
        tape.backward(loss)

        def f_of(which):
            def f(arr):
                parts = {"x": x0, "k": k0, "b": b0, which: arr}
                xx = ad.Tensor(parts["x"][None])
                return scalar_loss(
                    ad.conv2d(xx, ad.Tensor(parts["k"]), ad.Tensor(parts["b"])).data
                )

            return f

        for tensor, arr, name in [(x, x0, "x"), (k, k0, "k"), (b, b0, "b")]:
            num = numeric_gradient(f_of(name), arr)
            assert np.abs(tensor.grad - num).max() < 1e-4


class TestMaxPool:
    def test_single_window(self):
        out = ad.maxpool2x2(t64(np.array([[1.0, 2.0], [3.0, 4.0]])[:, :, None]))
        np.testing.assert_array_equal(out.data[:, :, 0], [[4.0]])

    def test_mnist_spatial_chain(self):
        x = t64(np.random.default_rng(0).random((28, 28, 16)))
        once = ad.maxpool2x2(x)
        twice = ad.maxpool2x2(once)
        assert once.shape == (14, 14, 16)
        assert twice.shape == (7, 7, 16)

    def test_gradient_routes_to_argmax(self):
        x = t64(np.array([[1.0, 2.0], [3.0, 4.0]])[:, :, None], requires_grad=True)
        tape = ad.Tape()
        out = ad.maxpool2x2(x, tape)
        loss = _sum_all(out, tape)
        tape.backward(loss)
        np.testing.assert_array_equal(x.grad[:, :, 0], [[0.0, 0.0], [0.0, 1.0]])

    def test_odd_dimensions_ceil(self):
        x = t64(np.random.default_rng(1).random((5, 7, 2)))
        out = ad.maxpool2x2(x)
        assert out.shape == (3, 4, 2)
        # high-edge windows only see real values
        assert np.isfinite(out.data).all()

    def test_tie_breaks_to_first_in_row_major_scan(self):
        x = t64(np.full((2, 2, 1), 5.0), requires_grad=True)
        tape = ad.Tape()
        out = ad.maxpool2x2(x, tape)
        loss = _sum_all(out, tape)
        tape.backward(loss)
        np.testing.assert_array_equal(x.grad[:, :, 0], [[1.0, 0.0], [0.0, 0.0]])


class TestLeakyRelu:
    @pytest.mark.parametrize("x,expected", [(5.0, 5.0), (-2.0, -0.2), (0.0, 0.0)])
    def test_values(self, x, expected):
        out = ad.leaky_relu(t64([x]))
        np.testing.assert_allclose(out.data, [expected])

    def test_gradient_slopes(self):
        x = t64([3.0, -1.0, 0.0], requires_grad=True)
        tape = ad.Tape()
        out = ad.leaky_relu(x, tape)
        loss = _sum_all(out, tape)
        tape.backward(loss)
        np.testing.assert_allclose(x.grad, [1.0, 0.1, 0.1])


class TestDropout:
    def test_disabled_is_identity(self):
        x = t64(np.random.default_rng(0).random(100))
        out = ad.dropout(x, 0.5, rng=np.random.default_rng(1), enabled=False)
        np.testing.assert_array_equal(out.data, x.data)

    def test_rate_zero_is_identity(self):
        x = t64(np.random.default_rng(0).random(100))
        out = ad.dropout(x, 0.0, rng=np.random.default_rng(1), enabled=True)
        np.testing.assert_array_equal(out.data, x.data)

    def test_inverted_scaling_preserves_expectation(self):
        x = t64(np.ones(10**6))
        out = ad.dropout(x, 1 / 3, rng=np.random.default_rng(7), enabled=True)
        assert 0.995 <= out.data.mean() <= 1.005

    def test_rate_one_rejected(self):
        with pytest.raises(ParameterError):
            ad.dropout(t64([1.0]), 1.0, rng=np.random.default_rng(0))

    def test_backward_uses_same_mask(self):
        x = t64(np.ones(1000), requires_grad=True)
        tape = ad.Tape()
        out = ad.dropout(x, 0.5, rng=np.random.default_rng(3), enabled=True, tape=tape)
        loss = _sum_all(out, tape)
        tape.backward(loss)
        np.testing.assert_array_equal(x.grad, out.data)


class TestSoftmaxCrossEntropy:
    def test_uniform_ten_classes(self):
        out = ad.softmax_cross_entropy(t64(np.zeros(10)), 3)
        np.testing.assert_allclose(float(out.data), math.log(10), rtol=1e-12)

    def test_two_equal_logits(self):
        out = ad.softmax_cross_entropy(t64([0.0, 0.0]), 1)
        np.testing.assert_allclose(float(out.data), math.log(2), rtol=1e-12)

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(5)
        z0 = rng.standard_normal(10)
        z = t64(z0, requires_grad=True)
        tape = ad.Tape()
        loss = ad.softmax_cross_entropy(z, 4, tape)
        tape.backward(loss)

        def f(arr):
            p = ad.softmax(arr)
            return -math.log(p[3])

        num = numeric_gradient(f, z0)
        assert np.abs(z.grad - num).max() < 1e-6

    def test_target_out_of_range(self):
        with pytest.raises(ParameterError):
            ad.softmax_cross_entropy(t64(np.zeros(5)), 6)
        with pytest.raises(ParameterError):
            ad.softmax_cross_entropy(t64(np.zeros(5)), 0)

    def test_softmax_lies_on_simplex(self):
        rng = np.random.default_rng(11)
        z = rng.standard_normal((50, 10)) * 20
        p = ad.softmax(z)
        assert (p >= 0).all() and (p <= 1).all()
        np.testing.assert_allclose(p.sum(axis=1), 1.0, atol=1e-9)


class TestL2Penalty:
    def test_zero_lambda(self):
        out = ad.l2_penalty([t64([2.0])], 0.0)
        assert float(out.data) == 0.0

    def test_value(self):
        out = ad.l2_penalty([t64([2.0])], 1e-3)
        np.testing.assert_allclose(float(out.data), 0.004)

    def test_gradient(self):
        w = t64([2.0], requires_grad=True)
        tape = ad.Tape()
        loss = ad.l2_penalty([w], 1e-3, tape)
        tape.backward(loss)
        np.testing.assert_allclose(w.grad, [0.004])


class TestAdam:
    def test_zero_gradient_leaves_params_unchanged(self):
        p = t64([1.0, 2.0], requires_grad=True)
        adam = ad.Adam([p])
        adam.step()
        np.testing.assert_array_equal(p.data, [1.0, 2.0])

    def test_first_step_moves_by_lr(self):
        p = t64([0.0], requires_grad=True)
        adam = ad.Adam([p], lr=1e-3)
        p.grad = np.array([1.0])
        adam.step()
        np.testing.assert_allclose(p.data, [-1e-3], rtol=1e-6)

    def test_determinism_over_100_steps(self):
        def run():
            rng = np.random.default_rng(21)
            p = ad.Tensor(
                np.random.default_rng(2).standard_normal(8).astype(np.float32),
                requires_grad=True,
            )
            adam = ad.Adam([p])
            for _ in range(100):
                p.grad = rng.standard_normal(8).astype(np.float32)
                adam.step()
            return p.data.copy()

        a, b = run(), run()
        assert (a == b).all()


class TestTape:
    def test_untouched_trainable_tensor_has_zero_gradient(self):
        used = t64([[1.0, 2.0]], requires_grad=True)
        untouched = t64([[5.0]], requires_grad=True)
        tape = ad.Tape()
        out = ad.matmul(used, t64([[1.0], [1.0]]), tape)
        tape.backward(out)
        assert used.grad is not None
        assert untouched.grad is None  # exactly zero contribution

    def test_gradient_accumulates_across_reuse(self):
        w = t64([[2.0]], requires_grad=True)
        tape = ad.Tape()
        a = ad.matmul(w, t64([[3.0]]), tape)
        b = ad.matmul(w, t64([[4.0]]), tape)
        out = ad.add(a, b, tape)
        tape.backward(out)
        np.testing.assert_allclose(w.grad, [[7.0]])


def _sum_all(out, tape):
    """Reduce a tensor to a scalar via matmul-with-ones (keeps ops in-suite)."""
    flat = ad.reshape(out, (1, -1), tape)
    ones = ad.Tensor(np.ones((flat.shape[1], 1), dtype=out.data.dtype))
    return ad.reshape(ad.matmul(flat, ones, tape), (), tape)
