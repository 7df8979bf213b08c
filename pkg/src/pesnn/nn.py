"""Single-hidden-layer perceptron with hand-written reverse-mode gradients.

Everything here is float64 numpy. A network maps an ``n x p`` matrix to a
length-``n`` vector; the output head is either the identity (regression) or
the logistic function (classification).
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Protocol, Sequence

import numpy as np

from .errors import DimensionError, PESError, StandardizerError, TrainingDivergenceError

HEADS = ("identity", "logistic")
ACTIVATIONS = ("relu", "tanh")


def sigmoid(z):
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


@dataclass
class DataMatrix:
    values: np.ndarray
    column_names: list[str]
    target: np.ndarray

    def __post_init__(self):
        self.values = np.array(self.values, dtype=float, ndmin=2)
        self.target = np.array(self.target, dtype=float).reshape(-1)
        self.column_names = [str(c) for c in self.column_names]
        n, p = self.values.shape
        if n == 0 or p == 0:
            raise DimensionError(f"DataMatrix needs n > 0 and p > 0, got {n}x{p}")
        if len(self.column_names) != p:
            raise DimensionError(f"{len(self.column_names)} column names for {p} columns")
        if len(set(self.column_names)) != p:
            raise PESError(f"duplicate column names: {self.column_names}")
        if self.target.shape[0] != n:
            raise DimensionError(f"target has {self.target.shape[0]} rows, values have {n}")
        if not (np.all(np.isfinite(self.values)) and np.all(np.isfinite(self.target))):
            raise PESError("DataMatrix contains non-finite entries")

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def p(self) -> int:
        return self.values.shape[1]

    def column_index(self, name: str) -> int:
        try:
            return self.column_names.index(name)
        except ValueError:
            raise PESError(f"unknown column {name!r}; have {self.column_names}") from None

    def rows(self, idx) -> "DataMatrix":
        return DataMatrix(self.values[idx], list(self.column_names), self.target[idx])

    def with_values(self, values) -> "DataMatrix":
        return DataMatrix(values, list(self.column_names), self.target.copy())


@dataclass
class MLPParams:
    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: float
    head: str = "identity"
    activation: str = "relu"

    def __post_init__(self):
        self.W1 = np.array(self.W1, dtype=float, ndmin=2)
        self.b1 = np.array(self.b1, dtype=float).reshape(-1)
        self.W2 = np.array(self.W2, dtype=float).reshape(1, -1)
        self.b2 = float(self.b2)
        hidden = self.W1.shape[0]
        if hidden < 1:
            raise DimensionError("hidden width must be >= 1")
        if self.b1.shape != (hidden,) or self.W2.shape != (1, hidden):
            raise DimensionError(
                f"inconsistent shapes W1={self.W1.shape} b1={self.b1.shape} W2={self.W2.shape}"
            )
        if self.head not in HEADS:
            raise PESError(f"head must be one of {HEADS}, got {self.head!r}")
        if self.activation not in ACTIVATIONS:
            raise PESError(f"activation must be one of {ACTIVATIONS}, got {self.activation!r}")

    @property
    def hidden(self) -> int:
        return self.W1.shape[0]

    @property
    def p(self) -> int:
        return self.W1.shape[1]

    @property
    def size(self) -> int:
        return self.W1.size + self.b1.size + self.W2.size + 1

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.to_vector())))

    def to_vector(self) -> np.ndarray:
        return np.concatenate([self.W1.ravel(), self.b1, self.W2.ravel(), [self.b2]])

    def from_vector(self, vec) -> "MLPParams":
        """Same architecture, parameters read from a flat vector."""
        vec = np.asarray(vec, dtype=float)
        if vec.shape != (self.size,):
            raise DimensionError(f"expected vector of length {self.size}, got {vec.shape}")
        h, p = self.W1.shape
        i = 0
        W1 = vec[i:i + h * p].reshape(h, p)
        i += h * p
        b1 = vec[i:i + h]
        i += h
        W2 = vec[i:i + h].reshape(1, h)
        i += h
        return replace(self, W1=W1.copy(), b1=b1.copy(), W2=W2.copy(), b2=float(vec[i]))

    def copy(self) -> "MLPParams":
        return self.from_vector(self.to_vector())

    def to_dict(self) -> dict:
        return {
            "W1": self.W1.tolist(),
            "b1": self.b1.tolist(),
            "W2": self.W2.tolist(),
            "b2": self.b2,
            "head": self.head,
            "activation": self.activation,
        }

    @classmethod
    def from_dict(cls, d) -> "MLPParams":
        return cls(d["W1"], d["b1"], d["W2"], d["b2"], d.get("head", "identity"),
                   d.get("activation", "relu"))


def init_params(p, hidden=32, head="identity", seed=0, activation="relu"):
    """Uniform fan-in scaled weights, zero biases."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    bound1 = 1.0 / np.sqrt(p)
    bound2 = 1.0 / np.sqrt(hidden)
    W1 = rng.uniform(-bound1, bound1, size=(hidden, p))
    W2 = rng.uniform(-bound2, bound2, size=(1, hidden))
    return MLPParams(W1, np.zeros(hidden), W2, 0.0, head=head, activation=activation)


def _check_input(params, X):
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != params.p:
        raise DimensionError(f"network expects {params.p} features, got array of shape {X.shape}")
    return X


def _activate(a, activation):
    if activation == "relu":
        return np.maximum(a, 0.0)
    return np.tanh(a)


def raw_forward(params: MLPParams, X, cache=False):
    """Pre-head output ``W2 act(W1 x + b1) + b2`` for every row."""
    X = _check_input(params, X)
    a = X @ params.W1.T + params.b1
    hid = _activate(a, params.activation)
    z = hid @ params.W2[0] + params.b2
    if cache:
        return z, (X, a, hid)
    return z


def apply_head(head, z):
    if head == "logistic":
        return sigmoid(z)
    return np.asarray(z, dtype=float)


def forward(params: MLPParams, X) -> np.ndarray:
    return apply_head(params.head, raw_forward(params, X))


def backward(params: MLPParams, cache, dz) -> np.ndarray:
    """Gradient (flat, same layout as ``to_vector``) of ``sum(dz * z)``."""
    X, a, hid = cache
    dW2 = dz @ hid
    db2 = dz.sum()
    dhid = np.outer(dz, params.W2[0])
    if params.activation == "relu":
        da = dhid * (a > 0)
    else:
        da = dhid * (1.0 - hid ** 2)
    dW1 = da.T @ X
    db1 = da.sum(axis=0)
    return np.concatenate([dW1.ravel(), db1, dW2, [db2]])


class Objective(Protocol):
    """A differentiable function of the network's raw outputs on fixed inputs.

    ``evaluate`` receives one raw-output vector per entry of ``inputs`` and
    returns ``(loss, [dloss/dz_k], terms)`` where ``terms`` maps term names to
    values (used only for reporting).
    """

    inputs: Sequence[np.ndarray]

    def evaluate(self, raw_outputs: Sequence[np.ndarray]) -> tuple[float, list, dict]:
        ...


def loss_and_grad(params: MLPParams, objective: Objective, return_terms=False):
    """Loss and exact gradient (as an ``MLPParams`` of partial derivatives)."""
    zs, caches = [], []
    for X in objective.inputs:
        z, c = raw_forward(params, X, cache=True)
        zs.append(z)
        caches.append(c)
    loss, dzs, terms = objective.evaluate(zs)
    if not np.isfinite(loss):
        bad = next((k for k, v in terms.items() if not np.isfinite(v)), None)
        raise TrainingDivergenceError(f"non-finite loss {loss}", term=bad)
    g = np.zeros(params.size)
    for c, dz in zip(caches, dzs):
        if dz is not None:
            g += backward(params, c, dz)
    grad = params.from_vector(g)
    if return_terms:
        return float(loss), grad, terms
    return float(loss), grad


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0

    @classmethod
    def zeros(cls, size) -> "AdamState":
        return cls(np.zeros(size), np.zeros(size), 0)


def adam_step(params, grads, state: AdamState, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
    """One bias-corrected Adam update; returns ``(new_params, new_state)``.

    ``params`` and ``grads`` are either ``MLPParams`` or flat arrays.
    """
    as_params = isinstance(params, MLPParams)
    theta = params.to_vector() if as_params else np.asarray(params, dtype=float)
    g = grads.to_vector() if isinstance(grads, MLPParams) else np.asarray(grads, dtype=float)
    t = state.t + 1
    m = beta1 * state.m + (1.0 - beta1) * g
    v = beta2 * state.v + (1.0 - beta2) * g * g
    m_hat = m / (1.0 - beta1 ** t)
    v_hat = v / (1.0 - beta2 ** t)
    theta = theta - lr * m_hat / (np.sqrt(v_hat) + eps)
    new_state = AdamState(m, v, t)
    if as_params:
        return params.from_vector(theta), new_state
    return theta, new_state


@dataclass
class Standardizer:
    means: np.ndarray
    stds: np.ndarray
    column_names: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.means = np.asarray(self.means, dtype=float).reshape(-1)
        self.stds = np.asarray(self.stds, dtype=float).reshape(-1)
        if self.means.shape != self.stds.shape:
            raise DimensionError("means and stds differ in length")
        if np.any(~(self.stds > 0)):
            raise StandardizerError("standard deviations must be strictly positive")

    def apply(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.means.shape[0]:
            raise DimensionError(f"standardizer fit on {self.means.shape[0]} columns, got {X.shape}")
        return (X - self.means) / self.stds

    def to_dict(self) -> dict:
        return {"means": self.means.tolist(), "stds": self.stds.tolist(),
                "column_names": list(self.column_names)}

    @classmethod
    def from_dict(cls, d) -> "Standardizer":
        return cls(d["means"], d["stds"], list(d.get("column_names", [])))


def fit_standardizer(X, column_names=None) -> Standardizer:
    """Column means and population standard deviations (ddof=0)."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise DimensionError(f"expected a 2-D array, got shape {X.shape}")
    names = list(column_names) if column_names is not None else [f"x{j}" for j in range(X.shape[1])]
    means = X.mean(axis=0)
    stds = X.std(axis=0)
    for j, s in enumerate(stds):
        # relative tolerance: a column equal to a constant up to rounding is still constant
        if not s > 1e-12 * max(1.0, abs(means[j])):
            raise StandardizerError(f"column {names[j]!r} is constant; cannot standardize")
    return Standardizer(means, stds, names)


def apply_standardizer(s: Standardizer, X) -> np.ndarray:
    return s.apply(X)
