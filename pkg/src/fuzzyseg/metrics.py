"""Classification metrics from a confusion matrix, plus fuzzy regression metrics.

Rows of the confusion matrix are ground-truth classes and columns are
predictions.  "Per-class accuracy" is recall (producer's accuracy).
Degenerate denominators produce 0 together with a flag instead of raising.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class Score:
    value: float
    degenerate: bool = False

    def __float__(self):
        return self.value


def confusion(pred, gt, num_classes: int) -> np.ndarray:
    pred = np.asarray(pred)
    gt = np.asarray(gt)
    if pred.shape != gt.shape:
        raise ValueError(f"shape mismatch: pred {pred.shape} vs gt {gt.shape}")
    for name, arr in (("pred", pred), ("gt", gt)):
        if arr.size and (arr.min() < 0 or arr.max() >= num_classes):
            raise ValueError(f"{name} has values outside [0, {num_classes})")
    idx = gt.astype(np.int64).ravel() * num_classes + pred.astype(np.int64).ravel()
    return np.bincount(idx, minlength=num_classes * num_classes).reshape(num_classes, num_classes)


def _total(cm) -> int:
    cm = np.asarray(cm)
    total = int(cm.sum())
    if cm.ndim != 2 or cm.shape[0] != cm.shape[1] or total <= 0:
        raise ValueError("confusion matrix must be square with a positive total")
    return total


def overall_accuracy(cm) -> float:
    return float(np.trace(cm)) / _total(cm)


def per_class_accuracy(cm, cls: int) -> Score:
    _total(cm)
    row = int(np.asarray(cm)[cls].sum())
    if row == 0:
        return Score(0.0, True)
    return Score(float(cm[cls][cls]) / row)


def precision(cm, cls: int) -> Score:
    _total(cm)
    col = int(np.asarray(cm)[:, cls].sum())
    if col == 0:
        return Score(0.0, True)
    return Score(float(cm[cls][cls]) / col)


def f1(cm, cls: int) -> Score:
    """Harmonic mean of precision and recall, computed as ``2 TP / (row + col)``."""
    _total(cm)
    cm = np.asarray(cm)
    row, col = int(cm[cls].sum()), int(cm[:, cls].sum())
    if row == 0 or col == 0:
        return Score(0.0, True)
    return Score(2 * int(cm[cls, cls]) / (row + col))


def kappa(cm) -> Score:
    """Cohen's kappa.

    Evaluated as ``(N * trace - sum(r_i c_i)) / (N^2 - sum(r_i c_i))`` so that
    integer counts give a single rounding.  When chance agreement is total
    the result is 1 for perfect agreement and 0 otherwise, flagged.
    """
    total = _total(cm)
    cm = np.asarray(cm)
    if np.issubdtype(cm.dtype, np.integer):
        cm = cm.astype(object)
    trace = cm.trace()
    chance = (cm.sum(axis=1) * cm.sum(axis=0)).sum()
    if chance == total * total:
        return Score(1.0 if trace == total else 0.0, True)
    return Score(float((total * trace - chance) / (total * total - chance)))


def regression_metrics(pred, target) -> dict:
    """MSE and cosine similarity between probabilities and a fuzzy target."""
    p = np.asarray(pred, dtype=np.float64).ravel()
    y = np.asarray(target, dtype=np.float64).ravel()
    if p.shape != y.shape:
        raise ValueError(f"shape mismatch: {np.shape(pred)} vs {np.shape(target)}")
    mse = float(np.mean((p - y) ** 2))
    p_norm, y_norm = float(np.linalg.norm(p)), float(np.linalg.norm(y))
    if p_norm < 1e-12 or y_norm < 1e-12:
        return {"mse": mse, "cosine_sim": 0.0, "cosine_degenerate": True}
    return {"mse": mse, "cosine_sim": float(p @ y) / (p_norm * y_norm), "cosine_degenerate": False}


@dataclass
class MetricsReport:
    confusion: np.ndarray | None = None
    regression: dict | None = None
    flags: list[str] = field(default_factory=list)

    def as_dict(self) -> dict:
        out: dict = {}
        flags = list(self.flags)
        if self.confusion is not None:
            cm = self.confusion
            c = cm.shape[0]
            per_class = [per_class_accuracy(cm, k) for k in range(c)]
            f1s = [f1(cm, k) for k in range(c)]
            kap = kappa(cm)
            out.update(
                oa=overall_accuracy(cm),
                kappa=kap.value,
                f1_fg=f1s[-1].value,
                f1_macro=float(np.mean([s.value for s in f1s])),
                acc_per_class=[s.value for s in per_class],
                confusion=cm.tolist(),
            )
            flags += [f"acc_class{k}_degenerate" for k, s in enumerate(per_class) if s.degenerate]
            flags += [f"f1_class{k}_degenerate" for k, s in enumerate(f1s) if s.degenerate]
            if kap.degenerate:
                flags.append("kappa_degenerate")
        if self.regression is not None:
            out["mse"] = self.regression["mse"]
            out["cosine_sim"] = self.regression["cosine_sim"]
            if self.regression.get("cosine_degenerate"):
                flags.append("cosine_degenerate")
        out["flags"] = flags
        return out

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), indent=2, sort_keys=True) + "\n"

    def to_text(self) -> str:
        lines = []
        for key, value in sorted(self.as_dict().items()):
            if isinstance(value, list):
                value = ",".join(str(v) for v in value) if key != "confusion" else ";".join(
                    " ".join(str(x) for x in row) for row in value)
            lines.append(f"{key}={value}")
        return "\n".join(lines) + "\n"
