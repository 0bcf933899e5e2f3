"""Training losses for the single-observed-positive regime.

Every loss takes the model's sigmoid outputs f in (0,1)^L plus the index of
the image's one observed positive, and returns the scalar loss together
with its gradient with respect to the pre-sigmoid logits. Probabilities are
clamped to [CLAMP, 1-CLAMP] before any logarithm, which keeps every loss
finite over the whole input range.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

CLAMP = 1e-7
LOSS_KINDS = ("AN", "AN-LS", "ROLE", "EM")


def sigmoid(z):
    """Numerically stable logistic function for scalars or arrays."""
    z = np.asarray(z, dtype=np.float64)
    scalar = z.ndim == 0
    z = np.atleast_1d(z)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return float(out[0]) if scalar else out


@dataclass(frozen=True)
class LossSpec:
    """Which loss to train with, plus its scalar knobs.

    Only the parameters of the selected kind are validated or used; the
    expected-positive count k has no principled default and should come
    from configuration.
    """

    kind: str
    ls_epsilon: float = 0.1
    em_alpha: float = 0.1
    role_k: float = 1.0
    role_lambda: float = 1.0

    def __post_init__(self):
        if self.kind not in LOSS_KINDS:
            raise ConfigError(f"unknown loss {self.kind!r}")
        if self.kind == "AN-LS" and not 0.0 <= self.ls_epsilon < 0.5:
            raise ConfigError(f"label smoothing must lie in [0, 0.5), got {self.ls_epsilon}")
        if self.kind == "EM" and self.em_alpha <= 0:
            raise ConfigError(f"entropy weight must be positive, got {self.em_alpha}")
        if self.kind == "ROLE":
            if self.role_k <= 0:
                raise ConfigError(f"expected positive count k must be positive, got {self.role_k}")
            if self.role_lambda < 0:
                raise ConfigError(f"regularizer weight must be non-negative, got {self.role_lambda}")


def _clamped(f: np.ndarray) -> np.ndarray:
    f = np.asarray(f, dtype=np.float64)
    if f.ndim != 1:
        raise ValueError("predictions must be a 1-D vector")
    return np.clip(f, CLAMP, 1.0 - CLAMP)


def _check_observed(observed: int, n: int) -> None:
    if not 0 <= observed < n:
        raise ValueError(f"observed index {observed} out of range for {n} categories")


def _mean_bce(pred: np.ndarray, target: np.ndarray) -> float:
    return float(-np.mean(target * np.log(pred) + (1.0 - target) * np.log1p(-pred)))


def loss_an(f, observed: int) -> tuple[float, np.ndarray]:
    """Assume-negative: BCE against a one-hot target at the observed positive."""
    fc = _clamped(f)
    _check_observed(observed, fc.shape[0])
    target = np.zeros(fc.shape[0])
    target[observed] = 1.0
    return _mean_bce(fc, target), (fc - target) / fc.shape[0]


def loss_an_ls(f, observed: int, ls_epsilon: float = 0.1) -> tuple[float, np.ndarray]:
    """Assume-negative with targets smoothed to 1-eps / eps.

    At ls_epsilon=0 this is exactly `loss_an` (shared code path).
    """
    if not 0.0 <= ls_epsilon < 0.5:
        raise ConfigError(f"label smoothing must lie in [0, 0.5), got {ls_epsilon}")
    fc = _clamped(f)
    _check_observed(observed, fc.shape[0])
    target = np.full(fc.shape[0], float(ls_epsilon))
    target[observed] = 1.0 - ls_epsilon
    return _mean_bce(fc, target), (fc - target) / fc.shape[0]


def loss_em(f, observed: int, alpha: float = 0.1) -> tuple[float, np.ndarray]:
    """Positive log-loss plus an entropy reward on the unobserved labels.

    Unobserved predictions are pushed toward 1/2, where the per-label
    binary entropy peaks, instead of being assumed negative.
    """
    if alpha <= 0:
        raise ConfigError(f"entropy weight must be positive, got {alpha}")
    fc = _clamped(f)
    _check_observed(observed, fc.shape[0])
    n = fc.shape[0]
    entropy = -(fc * np.log(fc) + (1.0 - fc) * np.log1p(-fc))
    loss = -(math.log(fc[observed]) + alpha * (entropy.sum() - entropy[observed])) / n
    grad = (alpha / n) * (np.log(fc) - np.log1p(-fc)) * fc * (1.0 - fc)
    grad[observed] = (fc[observed] - 1.0) / n
    return float(loss), grad


def loss_role(
    f,
    estimate,
    observed: int,
    k: float,
    lam: float = 1.0,
) -> tuple[float, np.ndarray, np.ndarray]:
    """Symmetric cross-entropy against a live label estimate, plus a count prior.

    `estimate` is the label estimator's sigmoid output for this image; the
    observed coordinate is pinned to 1 before evaluation. Each cross-entropy
    leg treats the other side as a constant (no gradient flows through the
    target argument), and the squared deviation of the estimate's sum from k
    regularizes the estimator. Returns (loss, grad wrt classifier logits,
    grad wrt estimator logits); the pinned coordinate's estimator gradient
    is zero.
    """
    if k <= 0:
        raise ConfigError(f"expected positive count k must be positive, got {k}")
    if lam < 0:
        raise ConfigError(f"regularizer weight must be non-negative, got {lam}")
    fc = _clamped(f)
    _check_observed(observed, fc.shape[0])
    est = np.asarray(estimate, dtype=np.float64).copy()
    if est.shape != fc.shape:
        raise ValueError(f"estimate shape {est.shape} != prediction shape {fc.shape}")
    est[observed] = 1.0
    ec = np.clip(est, CLAMP, 1.0 - CLAMP)
    n = fc.shape[0]
    total = float(ec.sum())
    loss = (
        0.5 * (_mean_bce(fc, ec) + _mean_bce(ec, fc))
        + lam * (total - k) ** 2 / n**2
    )
    grad_f = 0.5 * (fc - ec) / n
    grad_e = 0.5 * (ec - fc) / n + (2.0 * lam * (total - k) / n**2) * ec * (1.0 - ec)
    grad_e[observed] = 0.0
    return float(loss), grad_f, grad_e
