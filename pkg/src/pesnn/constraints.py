"""Pooled-effect-size penalties and the composite training objective.

A constraint says "moving feature ``j`` by ``h`` (standardized units) should
change the model output the way a published effect size says it does".
Three effect kinds are supported:

* ``SRC``: standardized regression coefficient, additive on the output.
* ``OR``: log odds ratio, a shift of the output's logit.
* ``RR``: log risk ratio, multiplicative on the (positive) output.

OR and RR values are always stored on the log scale; use
``PESConstraint.from_ratio`` to ingest a published ratio.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .errors import ConstraintError, DimensionError, PESError, TrainingDivergenceError
from .nn import sigmoid

KINDS = ("SRC", "OR", "RR")
TASKS = ("regression", "classification")


def default_perturbation(kind: str, value: float) -> float:
    """Perturbation size: 1 for SRCs; ``1/v`` (or 1 when ``v == 0``) for OR and RR."""
    kind = _check_kind(kind)
    if kind == "SRC" or value == 0:
        return 1.0
    h = 1.0 / value
    if not math.isfinite(h):
        raise ConstraintError(f"value {value!r} is too small for the 1/v perturbation rule")
    return h


def _check_kind(kind):
    k = str(kind).upper()
    if k not in KINDS:
        raise ConstraintError(f"constraint kind must be one of {KINDS}, got {kind!r}")
    return k


@dataclass
class PESConstraint:
    kind: str
    feature: str
    value: float
    confidence: float = 10000.0
    perturbation: float | None = None

    def __post_init__(self):
        self.kind = _check_kind(self.kind)
        self.value = float(self.value)
        self.confidence = float(self.confidence)
        if not math.isfinite(self.value):
            raise ConstraintError(f"constraint value must be finite, got {self.value}")
        if not self.confidence > 1:
            raise ConstraintError(
                f"confidence must be > 1 for log weighting, got {self.confidence} ({self.feature})"
            )
        if self.perturbation is not None:
            self.perturbation = float(self.perturbation)
            if self.perturbation == 0 or not math.isfinite(self.perturbation):
                raise ConstraintError(f"perturbation must be finite and nonzero ({self.feature})")

    @property
    def h(self) -> float:
        """The perturbation in use: the explicit override, else the default rule."""
        if self.perturbation is None:
            return default_perturbation(self.kind, self.value)
        return self.perturbation

    def rescaled(self, scale: float) -> "PESConstraint":
        """Same effect expressed per ``1/scale`` input units (value times ``scale``)."""
        return replace(self, value=self.value * scale)

    @classmethod
    def from_ratio(cls, kind, feature, ratio, confidence=10000.0, perturbation=None):
        """Build an OR/RR constraint from a published ratio (stored as its log)."""
        if not ratio > 0:
            raise ConstraintError(f"ratio must be positive, got {ratio}")
        return cls(kind, feature, math.log(ratio), confidence, perturbation)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "feature": self.feature, "value": self.value,
                "confidence": self.confidence, "perturbation": self.perturbation}

    @classmethod
    def from_dict(cls, d) -> "PESConstraint":
        unknown = set(d) - {"kind", "feature", "value", "confidence", "perturbation"}
        if unknown:
            raise ConstraintError(f"unknown constraint fields {sorted(unknown)}")
        return cls(d["kind"], d["feature"], d["value"], d.get("confidence", 10000.0),
                   d.get("perturbation"))


@dataclass(frozen=True)
class ResolvedConstraint:
    kind: str
    column: int
    value: float
    perturbation: float


def resolve(constraints: Sequence[PESConstraint], column_names) -> list[ResolvedConstraint]:
    names = list(column_names)
    out = []
    for c in constraints:
        hits = [j for j, n in enumerate(names) if n == c.feature]
        if len(hits) != 1:
            raise ConstraintError(f"feature {c.feature!r} must match exactly one of {names}")
        out.append(ResolvedConstraint(c.kind, hits[0], c.value, c.h))
    return out


@dataclass
class LossWeights:
    lambda0: float
    lambdas: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        self.lambda0 = float(self.lambda0)
        self.lambdas = np.asarray(self.lambdas, dtype=float).reshape(-1)
        allw = np.concatenate([[self.lambda0], self.lambdas])
        # lambda0 == 1 is the unconstrained case
        if np.any(allw <= 0) or np.any(allw > 1):
            raise PESError(f"loss weights must lie in (0, 1], got {allw.tolist()}")
        if abs(allw.sum() - 1.0) > 1e-12:
            raise PESError(f"loss weights must sum to 1, got {allw.sum()!r}")

    @property
    def q(self) -> int:
        return self.lambdas.shape[0]

    def to_dict(self) -> dict:
        return {"lambda0": self.lambda0, "lambdas": self.lambdas.tolist()}


def lambda_weights(data_confidence: float, constraint_confidences) -> LossWeights:
    """Log-scale relative normalization of confidences: ``ln c_j / sum_k ln c_k``.

    ``data_confidence`` is conventionally ``n_train * p``.
    """
    cs = np.concatenate([[float(data_confidence)], np.asarray(constraint_confidences, float).reshape(-1)])
    if np.any(~(cs > 1)):
        raise PESError(f"all confidences must be > 1, got {cs.tolist()}")
    logs = np.log(cs)
    w = logs / logs.sum()
    # absorb rounding into lambda0 so the sum is 1 to machine precision
    w[0] = 1.0 - w[1:].sum()
    return LossWeights(w[0], w[1:])


def perturb(X, j: int, h: float) -> np.ndarray:
    """Copy of ``X`` with ``h`` added to column ``j``."""
    X = np.asarray(X, dtype=float)
    if h == 0:
        raise ConstraintError("perturbation h = 0 makes the constraint vacuous")
    if not math.isfinite(h):
        raise ConstraintError(f"perturbation must be finite, got {h}")
    if not (0 <= j < X.shape[1]):
        raise DimensionError(f"column {j} out of range for {X.shape[1]} columns")
    out = X.copy()
    out[:, j] += h
    return out


def perturbation_shift(kind: str, h: float) -> float:
    """Signed shift applied to the input for a given kind (OR probes with ``-h``)."""
    return -h if kind == "OR" else h


# Penalties on head outputs. Each returns (value, d/d base, d/d perturbed).

def _src_penalty(f0, f1, v, h):
    n = f0.shape[0]
    r = f1 - v * h - f0
    return float(np.mean(r * r)), -2.0 * r / n, 2.0 * r / n


def _or_penalty(f0, fm, v, h):
    if np.any(~((fm > 0) & (fm < 1))) or np.any(~((f0 > 0) & (f0 < 1))):
        raise TrainingDivergenceError("OR penalty needs probabilities strictly inside (0, 1)")
    n = f0.shape[0]
    e = math.exp(v * h)
    den = e * fm - fm + 1.0
    shifted = e * fm / den
    r = shifted - f0
    return float(np.mean(r * r)), -2.0 * r / n, 2.0 * r / n * e / (den * den)


def _rr_penalty(f0, f1, v, h):
    if np.any(~(f1 > 0)) or np.any(~(f0 > 0)):
        raise TrainingDivergenceError("RR penalty needs strictly positive predictions")
    n = f0.shape[0]
    k = math.exp(-v * h)
    r = k * f1 - f0
    return float(np.mean(r * r)), -2.0 * r / n, 2.0 * r * k / n


_PENALTIES = {"SRC": _src_penalty, "OR": _or_penalty, "RR": _rr_penalty}


def _predict_checked(predict, X):
    f = np.asarray(predict(X), dtype=float).reshape(-1)
    if f.shape[0] != X.shape[0]:
        raise DimensionError(f"predictor returned {f.shape[0]} values for {X.shape[0]} rows")
    if not np.all(np.isfinite(f)):
        raise TrainingDivergenceError("predictor returned non-finite values")
    return f


def lmeta(kind, predict: Callable, X, column: int, v: float, h: float) -> float:
    kind = _check_kind(kind)
    X = np.asarray(X, dtype=float)
    f0 = _predict_checked(predict, X)
    f1 = _predict_checked(predict, perturb(X, column, perturbation_shift(kind, h)))
    return _PENALTIES[kind](f0, f1, v, h)[0]


def lmeta_src(predict, X, column, v, h=1.0) -> float:
    """Mean squared gap between ``f(x + h e_j) - f(x)`` and ``v h``."""
    return lmeta("SRC", predict, X, column, v, h)


def lmeta_or(predict, X, column, v, h=None) -> float:
    """Mean squared gap between ``p(x)`` and the odds of ``p(x - h e_j)`` scaled by ``e^{vh}``."""
    h = default_perturbation("OR", v) if h is None else h
    return lmeta("OR", predict, X, column, v, h)


def lmeta_rr(predict, X, column, v, h=None) -> float:
    h = default_perturbation("RR", v) if h is None else h
    return lmeta("RR", predict, X, column, v, h)


def _task_head(task):
    if task not in TASKS:
        raise PESError(f"task must be one of {TASKS}, got {task!r}")
    return "identity" if task == "regression" else "logistic"


def _check_weights(weights, constraints):
    if weights.q != len(constraints):
        raise PESError(f"{weights.q} constraint weights for {len(constraints)} constraints")


class CompositeObjective:
    """Weighted prediction loss plus one penalty per constraint, on one batch.

    Works on raw network outputs so that ``loss_and_grad`` can backpropagate;
    the head matching ``task`` is applied internally. Cross-entropy is taken
    from logits for stability.
    """

    def __init__(self, X, Y, constraints: Sequence[ResolvedConstraint], weights: LossWeights, task):
        self.head = _task_head(task)
        self.task = task
        self.X = np.asarray(X, dtype=float)
        self.Y = np.asarray(Y, dtype=float).reshape(-1)
        self.constraints = list(constraints)
        _check_weights(weights, self.constraints)
        self.weights = weights
        self.inputs = [self.X] + [
            perturb(self.X, c.column, perturbation_shift(c.kind, c.perturbation))
            for c in self.constraints
        ]

    def _head(self, z):
        if self.head == "logistic":
            f = sigmoid(z)
            return f, f * (1.0 - f)
        return z, None

    def evaluate(self, raw_outputs):
        z0 = raw_outputs[0]
        n = z0.shape[0]
        terms = {}
        dzs = [np.zeros(n) for _ in raw_outputs]
        f0, df0 = self._head(z0)
        if self.head == "logistic":
            lpred = float(np.mean(np.logaddexp(0.0, z0) - self.Y * z0))
            dzs[0] += self.weights.lambda0 * (f0 - self.Y) / n
        else:
            r = f0 - self.Y
            lpred = float(np.mean(r * r))
            dzs[0] += self.weights.lambda0 * 2.0 * r / n
        terms["pred"] = lpred
        loss = self.weights.lambda0 * lpred
        for i, c in enumerate(self.constraints):
            f1, df1 = self._head(raw_outputs[i + 1])
            try:
                val, d0, d1 = _PENALTIES[c.kind](f0, f1, c.value, c.perturbation)
            except TrainingDivergenceError as exc:
                raise TrainingDivergenceError(str(exc), term=f"meta[{i}]") from exc
            lam = self.weights.lambdas[i]
            terms[f"meta[{i}]"] = val
            loss += lam * val
            if df0 is not None:
                d0 = d0 * df0
                d1 = d1 * df1
            dzs[0] += lam * d0
            dzs[i + 1] += lam * d1
        return loss, dzs, terms


def prediction_loss(task, f, Y) -> float:
    """MSE (regression) or binary cross-entropy on probabilities (classification)."""
    _task_head(task)
    f = np.asarray(f, dtype=float)
    Y = np.asarray(Y, dtype=float).reshape(-1)
    if task == "regression":
        return float(np.mean((f - Y) ** 2))
    if np.any(~((f > 0) & (f < 1))):
        raise TrainingDivergenceError("cross-entropy needs probabilities strictly inside (0, 1)",
                                      term="pred")
    return float(-np.mean(Y * np.log(f) + (1.0 - Y) * np.log1p(-f)))


def composite_loss(predict, X, Y, constraints, weights: LossWeights, task, column_names=None) -> float:
    """Weighted sum of the prediction loss and each constraint's penalty.

    ``constraints`` may be ``PESConstraint`` (resolved against ``column_names``)
    or already-resolved constraints. ``predict`` returns head outputs.
    """
    X = np.asarray(X, dtype=float)
    if constraints and isinstance(constraints[0], PESConstraint):
        if column_names is None:
            raise PESError("column_names are required to resolve named constraints")
        constraints = resolve(constraints, column_names)
    _check_weights(weights, constraints)
    total = weights.lambda0 * prediction_loss(task, _predict_checked(predict, X), Y)
    for i, c in enumerate(constraints):
        try:
            total += weights.lambdas[i] * lmeta(c.kind, predict, X, c.column, c.value, c.perturbation)
        except (TrainingDivergenceError, PESError) as exc:
            raise type(exc)(f"constraint term meta[{i}]: {exc}") from exc
    return float(total)
