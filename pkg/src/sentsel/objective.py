"""Weighted multi-candidate loss and its exact gradient w.r.t. the logit matrix."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ObjectiveConfig:
    tau: float = 1.0
    lambda_rationale: float = 1.0
    supervised: bool = False
    stop_grad_weights: bool = False

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError(f"tau must be positive, got {self.tau}")
        if self.lambda_rationale < 0:
            raise ValueError("lambda_rationale must be non-negative")


@dataclass
class LossBreakdown:
    losses: np.ndarray
    confidences: np.ndarray
    weights: np.ndarray
    weighted: float
    rationale: float
    total: float
    dz: np.ndarray


def _logsumexp_rows(z: np.ndarray) -> np.ndarray:
    m = z.max(axis=1, keepdims=True)
    return (m + np.log(np.exp(z - m).sum(axis=1, keepdims=True)))[:, 0]


def _check_label(z: np.ndarray, y: int) -> None:
    if not 0 <= y < z.shape[1]:
        raise ValueError(f"label {y} outside [0, {z.shape[1]})")


def candidate_losses(z: np.ndarray, y: int) -> np.ndarray:
    """Cross-entropy of every candidate row against label ``y``."""
    z = np.atleast_2d(np.asarray(z, dtype=float))
    _check_label(z, y)
    return _logsumexp_rows(z) - z[:, y]


def row_argmax(z: np.ndarray) -> np.ndarray:
    """Class index of every row's maximum; numpy already resolves ties to the lowest index."""
    return np.argmax(z, axis=1)


def confidences(z: np.ndarray) -> np.ndarray:
    z = np.atleast_2d(np.asarray(z, dtype=float))
    return z.max(axis=1)


def weights(c: np.ndarray, tau: float) -> np.ndarray:
    if not tau > 0:
        raise ValueError(f"tau must be positive, got {tau}")
    s = np.asarray(c, dtype=float) / tau
    e = np.exp(s - s.max())
    return e / e.sum()


def weighted_loss(w: np.ndarray, l: np.ndarray) -> float:
    w, l = np.asarray(w, dtype=float), np.asarray(l, dtype=float)
    if w.shape != l.shape:
        raise ValueError(f"weights {w.shape} and losses {l.shape} differ in length")
    return float(w @ l)


def supervised_confidences(z: np.ndarray, y: int, gold_mask) -> np.ndarray:
    """Gold rows use the gold-class logit; all other rows use the row maximum."""
    z = np.atleast_2d(np.asarray(z, dtype=float))
    _check_label(z, y)
    mask = np.asarray(gold_mask, dtype=bool)
    if mask.shape != (z.shape[0],):
        raise ValueError("gold_mask must have one entry per candidate")
    return np.where(mask, z[:, y], z.max(axis=1))


def rationale_bce(c_star: np.ndarray, gold_mask) -> float:
    x = np.asarray(c_star, dtype=float)
    m = np.asarray(gold_mask, dtype=float)
    if x.shape != m.shape:
        raise ValueError("c_star and gold_mask differ in length")
    terms = np.maximum(x, 0.0) - x * m + np.log1p(np.exp(-np.abs(x)))
    return float(terms.mean())


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def total_loss_and_grad(z: np.ndarray, y: int, gold_mask, config: ObjectiveConfig) -> LossBreakdown:
    """Total loss for one sample and ``dL/dz``.

    The gradient has three parts: the per-row cross-entropy scaled by the
    weights, the weights' dependence on the row maxima (skipped when
    ``stop_grad_weights``), and, when supervised, the BCE through ``c*``.
    """
    z = np.atleast_2d(np.asarray(z, dtype=float))
    _check_label(z, y)
    C = z.shape[0]
    rows = np.arange(C)

    lse = _logsumexp_rows(z)
    losses = lse - z[:, y]
    amax = row_argmax(z)
    c = z[rows, amax]
    w = weights(c, config.tau)
    weighted = float(w @ losses)

    probs = np.exp(z - lse[:, None])
    probs[:, y] -= 1.0
    dz = w[:, None] * probs
    if not config.stop_grad_weights:
        dc = w * (losses - weighted) / config.tau
        dz[rows, amax] += dc

    bce = 0.0
    if config.supervised:
        mask = np.asarray(gold_mask, dtype=bool)
        if mask.shape != (C,):
            raise ValueError("gold_mask must have one entry per candidate")
        cols = np.where(mask, y, amax)
        cstar = z[rows, cols]
        bce = rationale_bce(cstar, mask)
        dcs = (_sigmoid(cstar) - mask) / C
        dz[rows, cols] += config.lambda_rationale * dcs

    total = weighted + (config.lambda_rationale * bce if config.supervised else 0.0)
    return LossBreakdown(losses, c, w, weighted, bce, total, dz)
