"""Optimizers, losses and evaluation metrics shared by all models."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class NumericalError(RuntimeError):
    """Raised when training produces non-finite values."""


@dataclass(frozen=True)
class OptimizerConfig:
    kind: str = "adam"
    learning_rate: float = 0.01
    epochs: int = 100
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("adam", "sgd"):
            raise ValueError(f"optimizer kind must be 'adam' or 'sgd', got {self.kind!r}")
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be non-negative")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0

    @classmethod
    def zeros_like(cls, params):
        return cls(np.zeros_like(params, dtype=float), np.zeros_like(params, dtype=float), 0)


def adam_step(params, grads, state: AdamState, cfg: OptimizerConfig):
    """One bias-corrected Adam update. Returns ``(new_params, new_state)``."""
    params = np.asarray(params, dtype=float)
    grads = np.asarray(grads, dtype=float)
    if params.shape != grads.shape or state.m.shape != params.shape:
        raise ValueError(f"shape mismatch: params {params.shape}, grads {grads.shape}, state {state.m.shape}")
    if not np.all(np.isfinite(grads)):
        raise NumericalError("non-finite gradient")
    t = state.t + 1
    m = cfg.beta1 * state.m + (1.0 - cfg.beta1) * grads
    v = cfg.beta2 * state.v + (1.0 - cfg.beta2) * grads * grads
    m_hat = m / (1.0 - cfg.beta1**t)
    v_hat = v / (1.0 - cfg.beta2**t)
    new = params - cfg.learning_rate * m_hat / (np.sqrt(v_hat) + cfg.eps)
    return new, AdamState(m, v, t)


def sgd_step(params, grads, cfg: OptimizerConfig):
    grads = np.asarray(grads, dtype=float)
    if not np.all(np.isfinite(grads)):
        raise NumericalError("non-finite gradient")
    return np.asarray(params, dtype=float) - cfg.learning_rate * grads


class Optimizer:
    """Stateful wrapper used by the training loops."""

    def __init__(self, cfg: OptimizerConfig, params):
        self.cfg = cfg
        self.state = AdamState.zeros_like(np.asarray(params, dtype=float))

    def step(self, params, grads):
        if self.cfg.kind == "sgd":
            return sgd_step(params, grads, self.cfg)
        new, self.state = adam_step(params, grads, self.state, self.cfg)
        return new


def check_loss(loss, epoch):
    if not np.isfinite(loss):
        raise NumericalError(f"loss became non-finite ({loss}) at epoch {epoch}")


def mse(pred, actual):
    pred, actual = _pair(pred, actual)
    return float(np.mean((pred - actual) ** 2))


def _pair(pred, actual):
    pred = np.asarray(pred, dtype=float)
    actual = np.asarray(actual, dtype=float)
    if pred.shape != actual.shape:
        raise ValueError(f"shape mismatch: pred {pred.shape} vs actual {actual.shape}")
    if pred.size == 0:
        raise ValueError("empty input")
    return pred, actual


def rmse(pred, actual) -> float:
    """Root mean squared error pooled over every entry (all channels jointly)."""
    return float(np.sqrt(mse(pred, actual)))


def rmse_per_channel(pred, actual) -> np.ndarray:
    pred, actual = _pair(pred, actual)
    if pred.ndim == 1:
        pred, actual = pred[:, None], actual[:, None]
    return np.sqrt(np.mean((pred - actual) ** 2, axis=0))


def pseudo_accuracy(rmse_value) -> float:
    if rmse_value < 0:
        raise ValueError(f"rmse must be non-negative, got {rmse_value}")
    return 1.0 / (1.0 + rmse_value)


@dataclass(frozen=True)
class Metrics:
    rmse: float
    pseudo_accuracy: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "pseudo_accuracy", pseudo_accuracy(self.rmse))

    @classmethod
    def of(cls, pred, actual):
        return cls(rmse(pred, actual))
