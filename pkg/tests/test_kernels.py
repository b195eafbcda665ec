"""Cross-backend agreement between the compiled kernels and the numpy
fallback, plus shared semantics both must satisfy."""

import numpy as np
import pytest

from fstcbdg._kernels import _numpy

try:
    from fstcbdg._kernels import _core
except ImportError:
    _core = None

BACKENDS = [("numpy", _numpy)] + ([("cython", _core)] if _core else [])
PAIRED = pytest.mark.skipif(_core is None, reason="compiled kernels not built")


def case(rng, n=32, d=12, k=7):
    x = rng.standard_normal((n, d))
    w = rng.standard_normal((k, d))
    b = rng.standard_normal(k)
    q = rng.random((n, k)) + 1e-6
    q /= q.sum(axis=1, keepdims=True)
    y = rng.integers(0, k, size=n)
    return x, w, b, q, y


@PAIRED
class TestBackendAgreement:
    def test_linear_probs(self):
        rng = np.random.default_rng(0)
        x, w, b, _, _ = case(rng)
        a = _numpy.linear_probs(x, w, b)
        c = _core.linear_probs(x, w, b)
        assert np.allclose(a, c, rtol=1e-12, atol=1e-15)

    def test_cross_entropies(self):
        rng = np.random.default_rng(1)
        x, w, b, q, y = case(rng)
        p = _numpy.linear_probs(x, w, b)
        assert _numpy.soft_cross_entropy(p, q) == pytest.approx(
            _core.soft_cross_entropy(p, q), rel=1e-12)
        assert _numpy.hard_cross_entropy(p, y) == pytest.approx(
            _core.hard_cross_entropy(p, y), rel=1e-12)

    def test_grad_accumulation(self):
        rng = np.random.default_rng(2)
        x, w, b, q, y = case(rng)
        p = _numpy.linear_probs(x, w, b)
        gw_a, gb_a = np.zeros_like(w), np.zeros_like(b)
        gw_c, gb_c = np.zeros_like(w), np.zeros_like(b)
        _numpy.add_soft_grads(x, p, q, gw_a, gb_a, 0.25)
        _core.add_soft_grads(x, p, q, gw_c, gb_c, 0.25)
        assert np.allclose(gw_a, gw_c, rtol=1e-12, atol=1e-15)
        assert np.allclose(gb_a, gb_c, rtol=1e-12, atol=1e-15)
        gw_a[:], gb_a[:], gw_c[:], gb_c[:] = 0, 0, 0, 0
        _numpy.add_hard_grads(x, p, y, gw_a, gb_a, 1.5)
        _core.add_hard_grads(x, p, y, gw_c, gb_c, 1.5)
        assert np.allclose(gw_a, gw_c, rtol=1e-12, atol=1e-15)
        assert np.allclose(gb_a, gb_c, rtol=1e-12, atol=1e-15)

    def test_momentum_step(self):
        rng = np.random.default_rng(3)
        p_a = rng.standard_normal(40)
        p_c = p_a.copy()
        buf_a = rng.standard_normal(40)
        buf_c = buf_a.copy()
        g = rng.standard_normal(40)
        _numpy.momentum_step(p_a, buf_a, g, 0.01, 0.9, 1e-5)
        _core.momentum_step(p_c, buf_c, g, 0.01, 0.9, 1e-5)
        assert np.allclose(p_a, p_c, rtol=1e-14, atol=1e-16)
        assert np.allclose(buf_a, buf_c, rtol=1e-14, atol=1e-16)


@pytest.mark.parametrize("name,impl", BACKENDS)
class TestSharedSemantics:
    def test_empty_batches(self, name, impl):
        p = np.zeros((0, 3))
        q = np.zeros((0, 3))
        y = np.zeros(0, dtype=np.int64)
        assert impl.soft_cross_entropy(p, q) == 0.0
        assert impl.hard_cross_entropy(p, y) == 0.0

    def test_hard_equals_soft_with_one_hot(self, name, impl):
        rng = np.random.default_rng(4)
        x, w, b, _, y = case(rng, n=16, d=5, k=4)
        p = impl.linear_probs(x, w, b)
        one_hot = np.eye(4)[y]
        assert impl.hard_cross_entropy(p, y) == impl.soft_cross_entropy(p, one_hot)
        gw_h, gb_h = np.zeros_like(w), np.zeros_like(b)
        gw_s, gb_s = np.zeros_like(w), np.zeros_like(b)
        impl.add_hard_grads(x, p, y, gw_h, gb_h, 0.5)
        impl.add_soft_grads(x, p, one_hot, gw_s, gb_s, 0.5)
        assert np.array_equal(gw_h, gw_s)
        assert np.array_equal(gb_h, gb_s)

    def test_log_floor_guards_zero_probs(self, name, impl):
        p = np.array([[1.0, 0.0]])
        q = np.array([[0.0, 1.0]])
        val = impl.soft_cross_entropy(p, q)
        assert np.isfinite(val)
        assert val == pytest.approx(-np.log(impl.LOG_FLOOR), rel=1e-12)

    def test_probs_rows_normalized(self, name, impl):
        rng = np.random.default_rng(5)
        x, w, b, _, _ = case(rng, n=11, d=9, k=6)
        p = impl.linear_probs(x, w, b)
        assert np.allclose(p.sum(axis=1), 1.0, atol=1e-12)
        assert np.all(p >= 0)
