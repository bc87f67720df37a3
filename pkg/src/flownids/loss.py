"""Classification losses over softmax probabilities.

The focal loss down-weights well-classified examples by the modulating
factor (1 - p_true)^gamma and rescales each class by a weight alpha_c, so
rare classes keep contributing gradient long after the majority class is
easy. With gamma = 0 and uniform alpha = 1 it reduces exactly to the mean
categorical cross-entropy, which is exported under its own name.

Both the loss and its analytic gradient with respect to the logits operate
on (B, C) arrays; the gradient already carries the 1/B of the batch mean.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Probabilities are floored here before the log so a confidently wrong
# prediction yields a large but finite loss.
LOG_FLOOR = 1e-12


@dataclass(frozen=True)
class FocalConfig:
    """Focusing exponent plus one weight per class."""

    gamma: float
    alpha: np.ndarray

    def __post_init__(self):
        if self.gamma < 0:
            raise ValueError(f"gamma must be >= 0, got {self.gamma}")
        alpha = np.asarray(self.alpha, dtype=np.float64)
        if alpha.ndim != 1:
            raise ValueError("alpha must be one weight per class")
        if np.any(alpha <= 0) or not np.all(np.isfinite(alpha)):
            raise ValueError("alpha weights must be finite and > 0")
        object.__setattr__(self, "alpha", alpha)

    @classmethod
    def uniform(cls, num_classes: int, gamma: float = 2.0) -> "FocalConfig":
        return cls(gamma=gamma, alpha=np.ones(num_classes))

    @classmethod
    def inverse_frequency(cls, class_counts: np.ndarray,
                          gamma: float = 2.0) -> "FocalConfig":
        """Weights proportional to 1/count, normalized to mean 1.

        Classes absent from the training histogram get weight 1 so an
        empty class cannot blow up the scale.
        """
        counts = np.asarray(class_counts, dtype=np.float64)
        if counts.ndim != 1 or counts.size == 0:
            raise ValueError("class_counts must be a non-empty 1-D array")
        if np.any(counts < 0):
            raise ValueError("class counts cannot be negative")
        alpha = np.ones_like(counts)
        seen = counts > 0
        if seen.any():
            inv = 1.0 / counts[seen]
            alpha[seen] = inv / inv.mean()
        return cls(gamma=gamma, alpha=alpha)

    @classmethod
    def explicit(cls, alpha, gamma: float = 2.0) -> "FocalConfig":
        return cls(gamma=gamma, alpha=np.asarray(alpha, dtype=np.float64))


def _check_batch(probs: np.ndarray, targets: np.ndarray):
    probs = np.asarray(probs, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    if probs.ndim != 2 or probs.shape != targets.shape:
        raise ValueError(
            f"probs {probs.shape} and one-hot targets {targets.shape} "
            "must both be (batch, classes)"
        )
    return probs, targets


def focal_loss(probs: np.ndarray, targets: np.ndarray, cfg: FocalConfig) -> float:
    """Mean over the batch of -alpha_c (1 - p_c)^gamma log(p_c) at the
    true class c of each row."""
    probs, targets = _check_batch(probs, targets)
    if cfg.alpha.shape[0] != probs.shape[1]:
        raise ValueError(
            f"alpha has {cfg.alpha.shape[0]} weights for {probs.shape[1]} classes"
        )
    p_true = np.sum(probs * targets, axis=1)
    a_true = targets @ cfg.alpha
    # clip keeps (1-p)^gamma real when p overshoots 1 by an ulp; 0**0 == 1
    # in numpy, so gamma == 0 degrades to plain weighted cross-entropy.
    modulator = np.power(np.clip(1.0 - p_true, 0.0, None), cfg.gamma)
    return float(np.mean(-a_true * modulator * np.log(np.maximum(p_true, LOG_FLOOR))))


def focal_loss_grad_logits(probs: np.ndarray, targets: np.ndarray,
                           cfg: FocalConfig) -> np.ndarray:
    """Gradient of focal_loss w.r.t. the logits that produced ``probs``.

    With p the true-class probability and q = 1 - p, the loss of one row
    is -alpha q^gamma log p, so dL/dp = alpha (gamma q^(gamma-1) log p -
    q^gamma / p). Through the softmax, dp/dz_j = p (targets_j - probs_j),
    and the batch mean contributes the final 1/B.
    """
    probs, targets = _check_batch(probs, targets)
    if cfg.alpha.shape[0] != probs.shape[1]:
        raise ValueError(
            f"alpha has {cfg.alpha.shape[0]} weights for {probs.shape[1]} classes"
        )
    batch = probs.shape[0]
    p_true = np.sum(probs * targets, axis=1)
    a_true = targets @ cfg.alpha
    p_safe = np.maximum(p_true, LOG_FLOOR)
    q = np.clip(1.0 - p_true, 0.0, None)
    log_p = np.log(p_safe)

    # dL/dp split into the cross-entropy term and the modulator term; the
    # latter vanishes identically for gamma == 0 and must not divide by
    # q == 0, so both edge cases are masked rather than computed.
    term_ce = -np.power(q, cfg.gamma) / p_safe
    if cfg.gamma == 0.0:
        term_mod = np.zeros_like(q)
    else:
        with np.errstate(divide="ignore", invalid="ignore"):
            term_mod = np.where(
                q > 0.0,
                cfg.gamma * np.power(q, cfg.gamma - 1.0) * log_p,
                0.0,
            )
    dl_dp = a_true * (term_ce + term_mod)

    # softmax chain rule: dp_true/dz = p_true * (targets - probs)
    dz = (dl_dp * p_true)[:, None] * (targets - probs)
    return dz / batch


def categorical_ce(probs: np.ndarray, targets: np.ndarray) -> float:
    """Mean categorical cross-entropy: focal loss at gamma 0, alpha 1."""
    probs, targets = _check_batch(probs, targets)
    return focal_loss(probs, targets, FocalConfig.uniform(probs.shape[1], gamma=0.0))


def categorical_ce_grad_logits(probs: np.ndarray, targets: np.ndarray) -> np.ndarray:
    """Softmax cross-entropy gradient, (probs - targets) / batch."""
    probs, targets = _check_batch(probs, targets)
    return (probs - targets) / probs.shape[0]
