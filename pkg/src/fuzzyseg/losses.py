"""Fuzzy training objectives and their gradients with respect to predictions.

Every loss takes a prediction and a target of the same shape and returns
``(loss, dloss/dpred)``.  Reductions are means over all elements so values
stay comparable across patch sizes.
"""

from __future__ import annotations

import numpy as np

EPS = 1e-7
COSINE_DEGENERATE = 1e-12
LOSS_KINDS = ("bce-paper", "bce-full", "mse", "cosine")


def _check(pred, target):
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch: pred {pred.shape} vs target {target.shape}")
    return pred, target


def loss_bce(pred, target, variant: str = "full") -> tuple[float, np.ndarray]:
    """Binary cross-entropy against soft targets.

    ``variant="paper"`` keeps only ``-y log p``; on its own that term is
    minimised by ``p = 1`` everywhere, so ``"full"`` (which adds
    ``-(1 - y) log(1 - p)``) is the default.  Predictions are clamped to
    ``[EPS, 1 - EPS]`` and the gradient is taken at the clamped value.
    """
    pred, y = _check(pred, target)
    p = np.clip(pred, EPS, 1.0 - EPS)
    n = p.size
    if variant == "paper":
        loss = float(np.mean(-y * np.log(p)))
        grad = -y / p / n
    elif variant == "full":
        loss = float(np.mean(-(y * np.log(p) + (1.0 - y) * np.log1p(-p))))
        grad = (p - y) / (p * (1.0 - p)) / n
    else:
        raise ValueError(f"unknown BCE variant {variant!r}")
    return loss, grad


def loss_mse(pred, target) -> tuple[float, np.ndarray]:
    pred, y = _check(pred, target)
    diff = pred - y
    return float(np.mean(diff * diff)), 2.0 * diff / diff.size


def loss_cosine(pred, target) -> tuple[float, np.ndarray]:
    """``1 - cos(pred, target)`` over the flattened arrays.

    If either vector has norm below ``COSINE_DEGENERATE`` the loss is 1 with
    a zero gradient.
    """
    pred, y = _check(pred, target)
    p_norm = float(np.linalg.norm(pred))
    y_norm = float(np.linalg.norm(y))
    if p_norm < COSINE_DEGENERATE or y_norm < COSINE_DEGENERATE:
        return 1.0, np.zeros_like(pred)
    dot = float(np.sum(y * pred))
    cos = dot / (y_norm * p_norm)
    grad = -(y / (y_norm * p_norm) - dot * pred / (y_norm * p_norm ** 3))
    return 1.0 - cos, grad


def compute_loss(kind: str, pred, target) -> tuple[float, np.ndarray]:
    if kind == "bce-paper":
        return loss_bce(pred, target, "paper")
    if kind == "bce-full":
        return loss_bce(pred, target, "full")
    if kind == "mse":
        return loss_mse(pred, target)
    if kind == "cosine":
        return loss_cosine(pred, target)
    raise ValueError(f"unknown loss kind {kind!r}; expected one of {', '.join(LOSS_KINDS)}")
