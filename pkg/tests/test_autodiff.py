import numpy as np
import pytest

import nfm.autodiff as ad
from nfm.autodiff import Tensor, grad_check
from nfm.diagnostics import op_gradchecks


def test_every_op_passes_gradcheck():
    results = op_gradchecks(seed=0)
    for name, err in results.items():
        assert err < 1e-4, f"{name}: {err}"


def test_relu_backward_blocked_at_negative_input():
    x = Tensor(np.array([-1.0]), requires_grad=True)
    out = ad.sum_(ad.relu(x))
    out.backward()
    assert x.grad[0] == 0.0


def test_complex_mul_identity():
    z = Tensor(np.array([[3.0, -2.0]]), requires_grad=True)
    one = Tensor(np.array([[1.0, 0.0]]))
    out = ad.complex_mul(one, z)
    np.testing.assert_allclose(out.data, z.data)


def test_sin_derivative_at_zero():
    x = Tensor(np.array([0.0]), requires_grad=True)
    ad.sum_(ad.sin(x)).backward()
    np.testing.assert_allclose(x.grad, [1.0])


def test_quadratic_gradcheck_tight():
    theta = Tensor(np.array([3.0]), requires_grad=True)
    err = grad_check(lambda: ad.sum_(ad.mul(theta, theta)), [theta], h=1e-5)
    assert err < 1e-8


def test_two_layer_net_focal_loss_gradcheck():
    # ~200 params through the spectral loss
    from nfm.tasks import focal_freq_loss

    rng = np.random.default_rng(0)
    w1 = Tensor(rng.normal(size=(9, 14), scale=0.5), requires_grad=True)
    b1 = Tensor(rng.normal(size=14, scale=0.1), requires_grad=True)
    w2 = Tensor(rng.normal(size=(14, 4), scale=0.5), requires_grad=True)
    b2 = Tensor(rng.normal(size=4, scale=0.1), requires_grad=True)
    params = [w1, b1, w2, b2]
    assert sum(p.data.size for p in params) == 200
    x = Tensor(rng.normal(size=(8, 9)))
    y = Tensor(rng.normal(size=(8, 4)))

    def build():
        h = ad.sin(x @ w1 + b1)
        out = h @ w2 + b2
        return focal_freq_loss(out, y)

    assert grad_check(build, params, h=1e-5) < 1e-4


def test_dropout_gradcheck_deterministic_under_seed():
    rng = np.random.default_rng(1)
    w = Tensor(rng.normal(size=(5, 4)), requires_grad=True)
    x = Tensor(rng.normal(size=(6, 5)))
    wt = rng.normal(size=(6, 4))

    def build():
        h = ad.dropout(x @ w, 0.4, np.random.default_rng(99))
        return ad.mean(ad.mul(h, Tensor(wt)))

    v1 = build().item()
    v2 = build().item()
    assert v1 == v2
    assert grad_check(build, [w], h=1e-5) < 1e-4


def test_shared_subexpression_accumulates():
    # f(x) = g + g with g = x*x must match a duplicated-subgraph build
    x1 = Tensor(np.array([1.5]), requires_grad=True)
    g = ad.mul(x1, x1)
    ad.sum_(ad.add(g, g)).backward()
    shared = x1.grad.copy()

    x2 = Tensor(np.array([1.5]), requires_grad=True)
    ad.sum_(ad.add(ad.mul(x2, x2), ad.mul(x2, x2))).backward()
    np.testing.assert_allclose(shared, x2.grad)
    np.testing.assert_allclose(shared, [6.0])


def test_diamond_graph_gradient():
    x = Tensor(np.array([2.0]), requires_grad=True)
    y = ad.add(x, Tensor(np.array([-4.0])))
    z = ad.add(x, Tensor(np.array([1.0])))
    ad.sum_(ad.mul(y, z)).backward()
    # d/dx (x-4)(x+1) = 2x - 3
    np.testing.assert_allclose(x.grad, [1.0])


def test_determinism_bit_identical():
    def run():
        rng = np.random.default_rng(42)
        w = Tensor(rng.normal(size=(8, 8)), requires_grad=True)
        x = Tensor(rng.normal(size=(4, 8)))
        h = ad.relu(x @ w)
        h = ad.dropout(h, 0.2, np.random.default_rng(7))
        loss = ad.mean(ad.mul(h, h))
        loss.backward()
        return loss.item(), w.grad.copy()

    l1, g1 = run()
    l2, g2 = run()
    assert l1 == l2
    assert np.array_equal(g1, g2)


def test_shape_mismatch_reports_both_shapes():
    a = Tensor(np.zeros((2, 3)))
    b = Tensor(np.zeros((4, 5)))
    with pytest.raises(ValueError, match=r"\(2, 3\).*\(4, 5\)"):
        ad.add(a, b)
    with pytest.raises(ValueError, match="matmul"):
        ad.matmul(a, Tensor(np.zeros((7, 2))))


def test_backward_requires_scalar():
    t = Tensor(np.zeros(3), requires_grad=True)
    with pytest.raises(ValueError, match="scalar"):
        t.backward()


def test_gradcheck_rejects_bad_h_and_nonfinite():
    theta = Tensor(np.array([1.0]), requires_grad=True)
    with pytest.raises(ValueError, match="outside"):
        grad_check(lambda: ad.sum_(theta), [theta], h=1e-3)
    bad = Tensor(np.array([np.inf]), requires_grad=True)
    with pytest.raises(ValueError, match="finite"):
        grad_check(lambda: ad.sum_(ad.mul(bad, bad)), [bad])


def test_gradcheck_detects_corrupted_backward(monkeypatch):
    # negative control: a wrong backward rule must be flagged
    original = ad.sin

    def corrupted_sin(a):
        out = original(a)
        if out._backward is not None:
            def bad_backward(g):
                a.grad = (a.grad if a.grad is not None else np.zeros_like(a.data)) \
                    + g * np.cos(a.data) * 1.01
            out._backward = bad_backward
        return out

    rng = np.random.default_rng(3)
    x = Tensor(rng.normal(size=6), requires_grad=True)
    w = rng.normal(size=6)
    err = grad_check(lambda: ad.mean(ad.mul(corrupted_sin(x), Tensor(w))), [x])
    assert err > 1e-4


def test_no_grad_suppresses_tape():
    x = Tensor(np.ones(3), requires_grad=True)
    with ad.no_grad():
        y = ad.mul(x, x)
    assert not y.requires_grad and y._backward is None


def test_rfft_irfft_roundtrip_in_graph():
    rng = np.random.default_rng(5)
    x = Tensor(rng.normal(size=(2, 10, 3)), requires_grad=True)
    y = ad.irfft_pair(ad.rfft_pair(x, axis=1), n=10, axis=1)
    np.testing.assert_allclose(y.data, x.data, atol=1e-12)


def test_float32_ops_preserve_dtype():
    x = Tensor(np.ones((4, 4), dtype=np.float32), requires_grad=True)
    y = ad.irfft_pair(ad.rfft_pair(x, axis=0), n=4, axis=0)
    assert y.data.dtype == np.float32
    loss = ad.mean(ad.mul(y, y))
    loss.backward()
    assert x.grad.dtype == np.float32
