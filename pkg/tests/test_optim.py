import numpy as np
import pytest

from nfm.autodiff import Tensor
from nfm.optim import Adam, cosine_lr


def test_zero_gradient_leaves_params_unchanged():
    p = Tensor(np.array([1.0, -2.0]), requires_grad=True)
    opt = Adam([p], lr=1e-3)
    p.grad = np.zeros(2)
    opt.step()
    np.testing.assert_allclose(p.data, [1.0, -2.0])


def test_first_step_magnitude_near_lr():
    # bias correction makes the first update ~ lr * sign(g)
    p = Tensor(np.array([0.0]), requires_grad=True)
    opt = Adam([p], lr=1e-3)
    p.grad = np.array([0.1])
    opt.step()
    assert abs(abs(p.data[0]) - 1e-3) / 1e-3 < 0.01
    assert p.data[0] < 0


def test_opposite_gradients_return_near_start():
    p = Tensor(np.array([0.5]), requires_grad=True)
    opt = Adam([p], lr=1e-3)
    p.grad = np.array([0.3])
    opt.step()
    p.grad = np.array([-0.3])
    opt.step()
    assert abs(p.data[0] - 0.5) < 1e-3


def test_nan_gradient_raises_diverged():
    p = Tensor(np.array([1.0]), requires_grad=True)
    opt = Adam([p])
    p.grad = np.array([np.nan])
    with pytest.raises(FloatingPointError, match="diverged"):
        opt.step()


def test_missing_grad_is_skipped():
    p = Tensor(np.array([1.0]), requires_grad=True)
    opt = Adam([p])
    opt.step()
    np.testing.assert_allclose(p.data, [1.0])


def test_zero_grad_resets():
    p = Tensor(np.array([1.0]), requires_grad=True)
    p.grad = np.array([5.0])
    Adam([p]).zero_grad()
    assert p.grad is None


def test_weight_decay_off_by_default():
    p = Tensor(np.array([10.0]), requires_grad=True)
    opt = Adam([p], lr=1e-3)
    assert opt.weight_decay == 0.0


def test_cosine_lr_endpoints_and_midpoint():
    assert cosine_lr(0, 100, 7.5e-4, 3.5e-4) == pytest.approx(7.5e-4)
    assert cosine_lr(100, 100, 7.5e-4, 3.5e-4) == pytest.approx(3.5e-4)
    assert cosine_lr(50, 100, 7.5e-4, 3.5e-4) == pytest.approx((7.5e-4 + 3.5e-4) / 2)


def test_cosine_lr_zero_horizon():
    assert cosine_lr(0, 0, 1e-3, 1e-5) == 1e-3
