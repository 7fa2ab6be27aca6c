import numpy as np
import numpy.testing as npt
import pytest

from extremecast.gradcheck import grad_check
from extremecast.losses import (LossConfig, compute_loss, extreme_weather_loss,
                                extreme_weights, huber_loss)
from extremecast.rng import Rng
from extremecast.tensor import Var, backward
from extremecast import tensor as T


def brute_force_extreme(pred, target, cfg):
    """Independent oracle: explicit loop, quantiles by the interpolation rule."""
    t = sorted(target)
    n = len(t)

    def quant(q):
        pos = q * (n - 1)
        lo = int(np.floor(pos))
        hi = min(lo + 1, n - 1)
        frac = pos - lo
        return t[lo] * (1 - frac) + t[hi] * frac

    hi, lo = quant(cfg.q_hi), quant(cfg.q_lo)
    total = 0.0
    for p, y in zip(pred, target):
        if y > hi:
            w = cfg.alpha_high
        elif y < lo:
            w = cfg.alpha_low
        else:
            w = cfg.beta
        total += w * (p - y) ** 2
    return total / n


def test_frozen_example():
    target = np.arange(1.0, 21.0)
    pred = Var(target + 1.0)
    cfg = LossConfig()
    loss, w = extreme_weather_loss(pred, target, cfg)
    assert loss.item() == pytest.approx(0.65, abs=1e-12)
    assert w[-1] == 2.0 and w[0] == 2.0 and set(w[1:-1]) == {0.5}


def test_equal_weights_is_beta_times_mse():
    rng = Rng(3, "init")
    target = rng.gaussian_array(64, 10.0, 5.0)
    pred = rng.gaussian_array(64, 10.0, 5.0)
    cfg = LossConfig(alpha_high=0.5, alpha_low=0.5, beta=0.5)
    loss, _ = extreme_weather_loss(Var(pred), target, cfg)
    assert loss.item() == pytest.approx(0.5 * np.mean((pred - target) ** 2), rel=1e-15)


def test_against_brute_force_oracle():
    rng = Rng(7, "init")
    for case in range(50):
        b = 2 + rng.randint(63)
        target = rng.gaussian_array(b, 20.0, 8.0)
        pred = target + rng.gaussian_array(b, 0.0, 3.0)
        cfg = LossConfig()
        loss, _ = extreme_weather_loss(Var(pred), target, cfg)
        assert loss.item() == pytest.approx(
            brute_force_extreme(pred, target, cfg), abs=1e-12), case


def test_closed_form_gradient():
    # d loss / d pred_i = 2 * w_i * (pred_i - t_i) / B, derived by hand
    rng = Rng(9, "init")
    target = rng.gaussian_array(16)
    pred = Var(rng.gaussian_array(16), requires_grad=True)
    cfg = LossConfig()
    loss, w = extreme_weather_loss(pred, target, cfg)
    backward(loss)
    npt.assert_allclose(pred.grad, 2.0 * w * (pred.value - target) / 16.0, rtol=1e-14)


def test_weights_ignore_predictions():
    target = np.linspace(0, 10, 30)
    cfg = LossConfig()
    w = extreme_weights(target, cfg)
    _, w2 = extreme_weather_loss(Var(target * 100.0), target, cfg)
    npt.assert_array_equal(w, w2)


def test_batch_too_small():
    with pytest.raises(ValueError):
        extreme_weights(np.array([1.0]), LossConfig())


def test_huber_values_and_grad():
    pred = Var(np.array([3.0, 0.5, -2.0]), requires_grad=True)
    target = np.zeros(3)
    loss = huber_loss(pred, target, delta=1.0)
    # per-sample: 2.5 (linear), 0.125 (quad), 1.5 (linear)
    assert loss.item() == pytest.approx((2.5 + 0.125 + 1.5) / 3.0, abs=1e-15)
    backward(loss)
    npt.assert_allclose(pred.grad, np.array([1.0, 0.5, -1.0]) / 3.0, rtol=1e-14)
    with pytest.raises(ValueError):
        huber_loss(pred, target, delta=0.0)


def test_huber_fd_gradient():
    rng = Rng(11, "init")
    target = rng.gaussian_array(12)

    def f(p):
        return huber_loss(p["pred"], target, delta=1.0)

    report = grad_check(f, {"pred": target + rng.gaussian_array(12, 0.0, 2.0)})
    assert report.passed(1e-6)


def test_compute_loss_dispatch():
    target = np.array([0.0, 1.0, 4.0])
    pred = Var(target + 1.0)
    assert compute_loss(pred, target, LossConfig(kind="huber", delta=2.0)).item() == \
        pytest.approx(0.5, abs=1e-15)
    with pytest.raises(ValueError):
        compute_loss(pred, target, LossConfig(kind="nope"))
