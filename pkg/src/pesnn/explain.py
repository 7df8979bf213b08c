"""Exact interventional Shapley values and the Shapley-distance score.

Absent features are marginalized by substituting background rows, and every
coalition is enumerated, so costs grow as ``2**p``; fine for a handful of
features.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from math import factorial

import numpy as np

from .errors import DimensionError, PESError, TrainingDivergenceError

MAX_FEATURES = 12
VALUE_FUNCTION = "interventional"


def _coalition_weights(p):
    # weight for a coalition of size s not containing the feature
    return np.array([factorial(s) * factorial(p - s - 1) / factorial(p) for s in range(p)])


def _coalition_values(predict, X, background, chunk_rows):
    n, p = X.shape
    B = background.shape[0]
    masks = np.arange(2 ** p)
    bits = ((masks[:, None] >> np.arange(p)) & 1).astype(bool)
    values = np.empty((2 ** p, n))
    for start in range(0, n, chunk_rows):
        xs = X[start:start + chunk_rows]
        k = xs.shape[0]
        for s in masks:
            comp = np.where(bits[s], xs[:, None, :], background[None, :, :]).reshape(k * B, p)
            f = np.asarray(predict(comp), dtype=float).reshape(-1)
            if f.shape[0] != k * B:
                raise DimensionError("predictor returned the wrong number of outputs")
            if not np.all(np.isfinite(f)):
                raise TrainingDivergenceError("predictor returned non-finite values")
            values[s, start:start + k] = f.reshape(k, B).mean(axis=1)
    return values, bits


def shapley_values(predict, X, background, chunk_rows=None) -> np.ndarray:
    """Shapley values for every row of ``X`` (``n x p``)."""
    X = np.array(X, dtype=float, ndmin=2)
    background = np.array(background, dtype=float, ndmin=2)
    n, p = X.shape
    if p > MAX_FEATURES:
        raise PESError(f"exact enumeration is capped at {MAX_FEATURES} features, got {p}")
    if background.shape[0] == 0:
        raise PESError("background set is empty")
    if background.shape[1] != p:
        raise DimensionError(f"background has {background.shape[1]} columns, inputs have {p}")
    if chunk_rows is None:
        chunk_rows = max(1, 200_000 // max(1, background.shape[0]))
    values, bits = _coalition_values(predict, X, background, chunk_rows)
    sizes = bits.sum(axis=1)
    w = _coalition_weights(p)
    phi = np.zeros((n, p))
    for j in range(p):
        without = np.flatnonzero(~bits[:, j])
        with_j = without | (1 << j)
        phi[:, j] = (w[sizes[without]][:, None] * (values[with_j] - values[without])).sum(axis=0)
    return phi


def exact_shapley(predict, x, background) -> np.ndarray:
    """Shapley vector of a single point ``x``."""
    x = np.asarray(x, dtype=float).reshape(1, -1)
    return shapley_values(predict, x, background)[0]


def reference_shapley(true_function, x, background) -> np.ndarray:
    """Shapley values of the data-generating function on the same background."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        return exact_shapley(true_function, x, background)
    return shapley_values(true_function, x, background)


def delta_shap(phi_model, phi_reference):
    """Per-feature mean absolute gap between two Shapley matrices, and its sum."""
    a = np.array(phi_model, dtype=float, ndmin=2)
    b = np.array(phi_reference, dtype=float, ndmin=2)
    if a.shape != b.shape:
        raise DimensionError(f"Shapley matrices differ in shape: {a.shape} vs {b.shape}")
    per = np.abs(a - b).mean(axis=0)
    return per, float(per.sum())


@dataclass
class ShapReport:
    feature_names: list[str]
    x_values: np.ndarray
    phi_model: np.ndarray
    phi_reference: np.ndarray
    background_summary: dict = field(default_factory=dict)
    reference_features: list[str] = field(default_factory=list)
    value_function: str = VALUE_FUNCTION

    def __post_init__(self):
        self.phi_model = np.asarray(self.phi_model, dtype=float)
        self.phi_reference = np.asarray(self.phi_reference, dtype=float)
        self.x_values = np.asarray(self.x_values, dtype=float)
        if self.phi_model.shape != self.phi_reference.shape:
            raise DimensionError("phi_model and phi_reference must share a shape")
        if self.phi_model.shape[1] != len(self.feature_names):
            raise DimensionError("one feature name per Shapley column required")
        if not self.reference_features:
            self.reference_features = list(self.feature_names)

    @property
    def delta_shap(self) -> np.ndarray:
        return delta_shap(self.phi_model, self.phi_reference)[0]

    @property
    def sum_delta_shap(self) -> float:
        return float(self.delta_shap.sum())

    def delta_by_feature(self) -> dict:
        return dict(zip(self.feature_names, self.delta_shap.tolist()))

    def rows(self):
        for i in range(self.phi_model.shape[0]):
            for j, name in enumerate(self.feature_names):
                yield i, name, self.x_values[i, j], self.phi_model[i, j], self.phi_reference[i, j]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["test_row", "feature", "x", "phi_model", "phi_reference"])
            for i, name, x, pm, pr in self.rows():
                w.writerow([i, name, repr(float(x)), repr(float(pm)), repr(float(pr))])


def background_sample(X, size=100, seed=0):
    """Row indices of a seeded background subsample (all rows if fewer)."""
    n = np.asarray(X).shape[0]
    rng = np.random.default_rng(seed)
    if n <= size:
        return np.arange(n)
    return np.sort(rng.choice(n, size=size, replace=False))
