"""Training losses.

The extreme-weighted loss re-weights squared errors by where each target sits
in the batch's own distribution: strictly above the high quantile or strictly
below the low quantile earns the tail weight, everything else the bulk weight:

    w_i = alpha_high  if t_i > quantile(t, q_hi)
          alpha_low   if t_i < quantile(t, q_lo)
          beta        otherwise
    L = (1/B) * sum_i w_i * (y_i - t_i)^2

Quantiles use the same linear-interpolation rule as the robust scaler (numpy
default).  Weights depend on targets only, so no gradient flows through them.
With alpha_high == alpha_low == beta the loss is exactly beta * MSE.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .tensor import Var


@dataclass
class LossConfig:
    kind: str = "extreme"  # "extreme" or "huber"
    alpha_high: float = 2.0
    alpha_low: float = 2.0
    beta: float = 0.5
    q_hi: float = 0.95
    q_lo: float = 0.05
    delta: float = 1.0  # huber transition point


def extreme_weights(target: np.ndarray, cfg: LossConfig) -> np.ndarray:
    """Per-sample weights from the batch's own target quantiles."""
    t = np.asarray(target, dtype=np.float64)
    if t.ndim != 1 or t.shape[0] < 2:
        raise ValueError("extreme loss needs a 1-D batch of at least 2 targets")
    tau_hi = np.quantile(t, cfg.q_hi)
    tau_lo = np.quantile(t, cfg.q_lo)
    w = np.full(t.shape, cfg.beta, dtype=np.float64)
    w[t > tau_hi] = cfg.alpha_high
    w[t < tau_lo] = cfg.alpha_low
    return w


def extreme_weather_loss(pred: Var, target: np.ndarray, cfg: LossConfig) -> tuple[Var, np.ndarray]:
    """Weighted MSE with batch-quantile tail emphasis.  Returns (loss, weights)."""
    w = extreme_weights(target, cfg)
    err = pred - Var(np.asarray(target, dtype=np.float64))
    loss = T.mean(Var(w) * err * err)
    return loss, w


def huber_loss(pred: Var, target: np.ndarray, delta: float = 1.0) -> Var:
    """Mean Huber loss; quadratic inside |e| <= delta, linear outside."""
    if delta <= 0:
        raise ValueError("huber delta must be positive")
    err = pred - Var(np.asarray(target, dtype=np.float64))
    ae = T.absolute(err)
    quad_mask = (ae.value <= delta).astype(np.float64)
    quad = err * err * 0.5
    lin = (ae - 0.5 * delta) * delta
    return T.mean(Var(quad_mask) * quad + Var(1.0 - quad_mask) * lin)


def compute_loss(pred: Var, target: np.ndarray, cfg: LossConfig) -> Var:
    """Dispatch on cfg.kind; the per-sample weights are discarded."""
    if cfg.kind == "extreme":
        loss, _ = extreme_weather_loss(pred, target, cfg)
        return loss
    if cfg.kind == "huber":
        return huber_loss(pred, target, cfg.delta)
    raise ValueError(f"unknown loss kind {cfg.kind!r}")
