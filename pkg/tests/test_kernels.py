"""Cross-backend agreement: the numba kernels must match the pure-numpy
path on the shapes both architectures use."""

import numpy as np
import pytest

from deepbass.kernels import BACKEND, numpy_backend

try:
    from deepbass.kernels import numba_backend
except ImportError:  # pragma: no cover
    numba_backend = None

needs_numba = pytest.mark.skipif(numba_backend is None, reason="numba unavailable")

SHAPES = [(2, 28, 28, 1, 16), (2, 14, 14, 16, 16), (3, 5, 7, 2, 4)]


def rand_case(b, h, w, ci, co, seed=0, dtype=np.float32):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((b, h, w, ci)).astype(dtype)
    k = (rng.standard_normal((3, 3, ci, co)) * 0.3).astype(dtype)
    bias = rng.standard_normal(co).astype(dtype)
    g = rng.standard_normal((b, h, w, co)).astype(dtype)
    return x, k, bias, g


class TestBackendSelection:
    def test_selected_backend_is_known(self):
        assert BACKEND in ("numba", "numpy")


@needs_numba
class TestConvAgreement:
    @pytest.mark.parametrize("shape", SHAPES)
    def test_forward(self, shape):
        x, k, bias, _ = rand_case(*shape)
        a = numpy_backend.conv2d_forward(x, k, bias)
        b = numba_backend.conv2d_forward(x, k, bias)
        np.testing.assert_allclose(a, b, atol=1e-4)

    @pytest.mark.parametrize("shape", SHAPES)
    def test_backward_input(self, shape):
        _, k, _, g = rand_case(*shape)
        a = numpy_backend.conv2d_backward_input(g, k)
        b = numba_backend.conv2d_backward_input(g, k)
        np.testing.assert_allclose(a, b, atol=1e-4)

    @pytest.mark.parametrize("shape", SHAPES)
    def test_backward_kernels(self, shape):
        x, _, _, g = rand_case(*shape)
        a = numpy_backend.conv2d_backward_kernels(x, g)
        b = numba_backend.conv2d_backward_kernels(x, g)
        np.testing.assert_allclose(a, b, atol=1e-3)

    def test_float64_supported(self):
        x, k, bias, _ = rand_case(2, 8, 8, 3, 5, dtype=np.float64)
        a = numpy_backend.conv2d_forward(x, k, bias)
        b = numba_backend.conv2d_forward(x, k, bias)
        assert a.dtype == b.dtype == np.float64
        np.testing.assert_allclose(a, b, atol=1e-12)


@needs_numba
class TestPoolAgreement:
    @pytest.mark.parametrize("hw", [(28, 28), (14, 14), (7, 7), (5, 9)])
    def test_forward_and_routing(self, hw):
        rng = np.random.default_rng(1)
        x = rng.standard_normal((2, *hw, 16)).astype(np.float32)
        out_a, idx_a = numpy_backend.maxpool2x2_forward(x)
        out_b, idx_b = numba_backend.maxpool2x2_forward(x)
        np.testing.assert_array_equal(out_a, out_b)
        np.testing.assert_array_equal(idx_a, idx_b)
        g = rng.standard_normal(out_a.shape).astype(np.float32)
        dx_a = numpy_backend.maxpool2x2_backward(idx_a, g, *hw)
        dx_b = numba_backend.maxpool2x2_backward(idx_b, g, *hw)
        np.testing.assert_array_equal(dx_a, dx_b)

    def test_tie_routing_matches(self):
        x = np.zeros((1, 4, 4, 2), dtype=np.float32)  # everything ties
        _, idx_a = numpy_backend.maxpool2x2_forward(x)
        _, idx_b = numba_backend.maxpool2x2_forward(x)
        assert (idx_a == 0).all()
        np.testing.assert_array_equal(idx_a, idx_b)
