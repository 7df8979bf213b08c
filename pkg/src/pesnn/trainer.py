"""Minibatch Adam training with epoch-level early stopping."""
from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .constraints import CompositeObjective, LossWeights, PESConstraint, lambda_weights, resolve
from .errors import PESError, TrainingDivergenceError
from .metrics import task_metric
from .nn import (AdamState, DataMatrix, MLPParams, Standardizer, adam_step, fit_standardizer,
                 forward, init_params, loss_and_grad, raw_forward)

MONITORS = ("composite", "pred_only")
CONSTRAINT_UNITS = ("standardized", "raw")


@dataclass
class TrainConfig:
    batch_size: int = 64
    max_epochs: int = 1000
    patience: int = 10
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    hidden: int = 32
    activation: str = "relu"
    seed: int = 0
    monitor: str = "composite"
    constraint_units: str = "standardized"

    def __post_init__(self):
        if self.batch_size < 1 or self.patience < 1 or self.max_epochs < 1:
            raise PESError("batch_size, patience and max_epochs must all be >= 1")
        if self.hidden < 1:
            raise PESError("hidden must be >= 1")
        if self.monitor not in MONITORS:
            raise PESError(f"monitor must be one of {MONITORS}, got {self.monitor!r}")
        if self.constraint_units not in CONSTRAINT_UNITS:
            raise PESError(f"constraint_units must be one of {CONSTRAINT_UNITS}")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class EpochRecord:
    epoch: int
    train_total: float
    val_total: float
    train_terms: dict
    val_terms: dict


@dataclass
class TrainedModel:
    params: MLPParams
    standardizer: Standardizer
    history: list[EpochRecord]
    stopped_epoch: int
    best_epoch: int
    task: str
    feature_names: list[str] = field(default_factory=list)
    constraints: list[PESConstraint] = field(default_factory=list)
    weights: LossWeights | None = None

    def predict(self, X_raw) -> np.ndarray:
        return forward(self.params, self.standardizer.apply(X_raw))

    def to_dict(self) -> dict:
        return {
            "task": self.task,
            "feature_names": list(self.feature_names),
            "params": self.params.to_dict(),
            "standardizer": self.standardizer.to_dict(),
            "constraints": [c.to_dict() for c in self.constraints],
            "weights": self.weights.to_dict() if self.weights is not None else None,
            "stopped_epoch": self.stopped_epoch,
            "best_epoch": self.best_epoch,
        }

    @classmethod
    def from_dict(cls, d) -> "TrainedModel":
        w = d.get("weights")
        return cls(
            params=MLPParams.from_dict(d["params"]),
            standardizer=Standardizer.from_dict(d["standardizer"]),
            history=[],
            stopped_epoch=int(d.get("stopped_epoch", 0)),
            best_epoch=int(d.get("best_epoch", 0)),
            task=d["task"],
            feature_names=list(d.get("feature_names", [])),
            constraints=[PESConstraint.from_dict(c) for c in d.get("constraints", [])],
            weights=LossWeights(w["lambda0"], w["lambdas"]) if w else None,
        )


def save_model(model: TrainedModel, path) -> None:
    Path(path).write_text(json.dumps(model.to_dict(), indent=2))


def load_model(path) -> TrainedModel:
    return TrainedModel.from_dict(json.loads(Path(path).read_text()))


def default_weights(constraints, n_train, p, data_confidence=None) -> LossWeights:
    c0 = n_train * p if data_confidence is None else data_confidence
    return lambda_weights(c0, [c.confidence for c in constraints])


def _monitored(params, objective, monitor):
    zs = [raw_forward(params, X) for X in objective.inputs]
    loss, _, terms = objective.evaluate(zs)
    if monitor == "pred_only":
        return terms["pred"], terms
    return float(loss), terms


def train(train_data: DataMatrix, val_data: DataMatrix, constraints: Sequence[PESConstraint] = (),
          weights: LossWeights | None = None, config: TrainConfig | None = None,
          task: str = "regression") -> TrainedModel:
    """Fit one network.

    Inputs are raw; a standardizer is fit on ``train_data`` and applied to both
    splits. With no constraints and ``lambda0 == 1`` this is ordinary training.
    The returned parameters are the snapshot with the lowest monitored
    validation loss.

    With ``config.constraint_units == "raw"`` each constraint value is read as
    an effect per raw unit of its feature and multiplied by the training
    standard deviation before use; otherwise values are taken to be per
    standardized unit.
    """
    config = config or TrainConfig()
    constraints = list(constraints)
    if val_data.column_names != train_data.column_names:
        raise PESError("train and validation columns differ")
    if weights is None:
        weights = default_weights(constraints, train_data.n, train_data.p)
    std = fit_standardizer(train_data.values, train_data.column_names)
    model_constraints = constraints
    if config.constraint_units == "raw":
        model_constraints = [c.rescaled(std.stds[train_data.column_index(c.feature)])
                             for c in constraints]
    resolved = resolve(model_constraints, train_data.column_names)
    Xtr = std.apply(train_data.values)
    Ytr = train_data.target
    val_obj = CompositeObjective(std.apply(val_data.values), val_data.target, resolved, weights, task)

    rng = np.random.default_rng(config.seed)
    head = "identity" if task == "regression" else "logistic"
    params = init_params(train_data.p, config.hidden, head, rng, config.activation)
    state = AdamState.zeros(params.size)

    n = Xtr.shape[0]
    history: list[EpochRecord] = []
    best_val, best_params, best_epoch = np.inf, params.copy(), 0
    stale = 0
    epoch = 0
    for epoch in range(1, config.max_epochs + 1):
        perm = rng.permutation(n)
        total = 0.0
        term_sums: dict[str, float] = {}
        for b, start in enumerate(range(0, n, config.batch_size)):
            idx = perm[start:start + config.batch_size]
            obj = CompositeObjective(Xtr[idx], Ytr[idx], resolved, weights, task)
            try:
                loss, grad, terms = loss_and_grad(params, obj, return_terms=True)
            except TrainingDivergenceError as exc:
                raise TrainingDivergenceError(str(exc), term=exc.term, epoch=epoch, batch=b) from exc
            params, state = adam_step(params, grad, state, config.lr, config.beta1,
                                      config.beta2, config.eps)
            total += loss * len(idx)
            for k, v in terms.items():
                term_sums[k] = term_sums.get(k, 0.0) + v * len(idx)
        try:
            val_loss, val_terms = _monitored(params, val_obj, config.monitor)
        except TrainingDivergenceError as exc:
            raise TrainingDivergenceError(f"validation: {exc}", term=exc.term, epoch=epoch) from exc
        if not np.isfinite(val_loss):
            raise TrainingDivergenceError("non-finite validation loss", epoch=epoch)
        history.append(EpochRecord(epoch, total / n, val_loss,
                                   {k: v / n for k, v in term_sums.items()}, val_terms))
        if val_loss < best_val:
            best_val, best_params, best_epoch = val_loss, params.copy(), epoch
            stale = 0
        else:
            stale += 1
            if stale >= config.patience:
                break

    return TrainedModel(best_params, std, history, epoch, best_epoch, task,
                        list(train_data.column_names), constraints, weights)


def evaluate(model: TrainedModel, X, Y, task=None) -> dict:
    """Task metric (R^2 or ROC AUC) and prediction loss on raw inputs."""
    task = task or model.task
    pred = model.predict(X)
    Y = np.asarray(Y, dtype=float)
    record = task_metric(task, Y, pred)
    if task == "regression":
        loss = float(np.mean((pred - Y) ** 2))
    else:
        eps = 1e-15
        pc = np.clip(pred, eps, 1 - eps)
        loss = float(-np.mean(Y * np.log(pc) + (1 - Y) * np.log(1 - pc)))
    return {"metric": record, "loss": loss}


def write_history_csv(model: TrainedModel, path) -> None:
    """Columns: epoch, train_total, val_total, then train_/val_ per-term values."""
    if not model.history:
        raise PESError("model has no training history")
    keys = list(model.history[0].train_terms)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["epoch", "train_total", "val_total"]
                   + [f"train_{k}" for k in keys] + [f"val_{k}" for k in keys])
        for r in model.history:
            w.writerow([r.epoch, repr(r.train_total), repr(r.val_total)]
                       + [repr(r.train_terms[k]) for k in keys]
                       + [repr(r.val_terms[k]) for k in keys])
