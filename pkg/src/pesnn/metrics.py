"""Task metrics: coefficient of determination and ROC AUC."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from .errors import DimensionError, UndefinedMetricError


@dataclass(frozen=True)
class MetricRecord:
    name: str
    value: float
    n: int


def _pair(a, b):
    a = np.asarray(a, dtype=float).reshape(-1)
    b = np.asarray(b, dtype=float).reshape(-1)
    if a.shape != b.shape:
        raise DimensionError(f"length mismatch: {a.shape[0]} vs {b.shape[0]}")
    return a, b


def r2(y_true, y_pred) -> float:
    y_true, y_pred = _pair(y_true, y_pred)
    if y_true.shape[0] < 2:
        raise UndefinedMetricError("R^2 needs at least two observations")
    ss_tot = np.sum((y_true - y_true.mean()) ** 2)
    if ss_tot == 0:
        raise UndefinedMetricError("R^2 is undefined for a constant target")
    return float(1.0 - np.sum((y_true - y_pred) ** 2) / ss_tot)


def roc_auc(labels, scores) -> float:
    """Mann-Whitney estimate of P(score_pos > score_neg), ties counted as 1/2."""
    labels, scores = _pair(labels, scores)
    pos = labels == 1
    neg = labels == 0
    if not np.all(pos | neg):
        raise UndefinedMetricError("labels must be 0 or 1")
    n_pos, n_neg = int(pos.sum()), int(neg.sum())
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError("ROC AUC needs both classes present")
    ranks = rankdata(scores)  # average ranks handle ties
    u = ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def task_metric(task, y_true, y_pred) -> MetricRecord:
    if task == "regression":
        return MetricRecord("r2", r2(y_true, y_pred), len(y_true))
    return MetricRecord("roc_auc", roc_auc(y_true, y_pred), len(y_true))
