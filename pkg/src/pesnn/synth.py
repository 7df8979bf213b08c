"""Synthetic exposure scenarios and the two data-corruption protocols.

The default scenarios mimic a confounded exposure setting: ``mercury`` and
``fish_intake`` are strongly correlated with opposite effects on the outcome,
``perceived_stress`` is an independent linear driver and ``bmi`` (regression
only) acts through a cosine.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DimensionError, PESError

REGRESSION_COLUMNS = ["mercury", "fish_intake", "perceived_stress", "bmi"]
CLASSIFICATION_COLUMNS = ["mercury", "fish_intake", "perceived_stress"]
REGRESSION_BETAS = (1.0, 1.0, -2.0, 5.0, 10.0)
CLASSIFICATION_BETAS = (0.0, 1.0, -2.0, 5.0)
CORRUPTION_MODES = ("gaussian_noise", "mcar_impute")
LABEL_RULES = ("bernoulli", "threshold")


def confounded_covariance(p):
    cov = np.eye(p)
    cov[0, 1] = cov[1, 0] = 0.8
    return cov


@dataclass
class ScenarioConfig:
    task: str
    m: int
    mean: np.ndarray
    covariance: np.ndarray
    betas: np.ndarray
    seed: int = 0
    column_names: list[str] = field(default_factory=list)
    label_rule: str = "bernoulli"

    def __post_init__(self):
        if self.task not in ("regression", "classification"):
            raise PESError(f"unknown task {self.task!r}")
        self.mean = np.asarray(self.mean, dtype=float).reshape(-1)
        self.covariance = np.asarray(self.covariance, dtype=float)
        self.betas = np.asarray(self.betas, dtype=float).reshape(-1)
        self.m = int(self.m)
        self.seed = int(self.seed)
        p = self.mean.shape[0]
        if self.covariance.shape != (p, p):
            raise DimensionError(f"covariance shape {self.covariance.shape} for {p} means")
        if not np.allclose(self.covariance, self.covariance.T):
            raise PESError("covariance must be symmetric")
        if self.betas.shape[0] != p + 1:
            raise DimensionError(f"need {p + 1} coefficients (with intercept), got {self.betas.shape[0]}")
        if self.m < 1:
            raise PESError("m must be positive")
        if not self.column_names:
            self.column_names = [f"x{j + 1}" for j in range(p)]
        if len(self.column_names) != p:
            raise DimensionError("one column name per variable required")
        if self.label_rule not in LABEL_RULES:
            raise PESError(f"label_rule must be one of {LABEL_RULES}")
        cholesky(self.covariance)

    @property
    def p(self) -> int:
        return self.mean.shape[0]

    def to_dict(self) -> dict:
        return {
            "task": self.task, "m": self.m, "mean": self.mean.tolist(),
            "covariance": self.covariance.tolist(), "betas": self.betas.tolist(),
            "seed": self.seed, "column_names": list(self.column_names),
            "label_rule": self.label_rule,
        }

    @classmethod
    def from_dict(cls, d) -> "ScenarioConfig":
        return cls(**d)

    def true_function(self):
        """The noiseless generative function on raw inputs (probabilities for classification)."""
        betas = self.betas.copy()
        if self.task == "regression":
            return lambda X: regression_function(X, betas)
        return lambda X: logistic_function(X, betas)


def regression_scenario(seed=0, m=1000, **kw) -> ScenarioConfig:
    return ScenarioConfig("regression", m, np.zeros(4), confounded_covariance(4),
                          REGRESSION_BETAS, seed, list(REGRESSION_COLUMNS), **kw)


def classification_scenario(seed=0, m=1000, **kw) -> ScenarioConfig:
    return ScenarioConfig("classification", m, np.zeros(3), confounded_covariance(3),
                          CLASSIFICATION_BETAS, seed, list(CLASSIFICATION_COLUMNS), **kw)


def cholesky(cov):
    try:
        return np.linalg.cholesky(np.asarray(cov, dtype=float))
    except np.linalg.LinAlgError:
        raise PESError("covariance matrix is not positive definite") from None


def sample_mvn(config: ScenarioConfig, rng=None) -> np.ndarray:
    """``m`` rows ``mean + L z`` with ``L`` the Cholesky factor of the covariance."""
    rng = np.random.default_rng(config.seed) if rng is None else rng
    L = cholesky(config.covariance)
    Z = rng.standard_normal((config.m, config.p))
    return config.mean + Z @ L.T


def regression_function(X, betas) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    betas = np.asarray(betas, dtype=float)
    if X.ndim != 2 or X.shape[1] != 4 or betas.shape[0] != 5:
        raise DimensionError("regression target needs 4 columns and 5 coefficients")
    return (betas[0] + betas[1] * X[:, 0] + betas[2] * X[:, 1] + betas[3] * X[:, 2]
            + betas[4] * np.cos(X[:, 3]))


def gen_regression_targets(X, betas=REGRESSION_BETAS) -> np.ndarray:
    return regression_function(X, betas)


def logistic_function(X, betas) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    betas = np.asarray(betas, dtype=float)
    if X.ndim != 2 or X.shape[1] != betas.shape[0] - 1:
        raise DimensionError(f"{X.shape} inputs for {betas.shape[0]} coefficients")
    return 1.0 / (1.0 + np.exp(-(betas[0] + X @ betas[1:])))


def gen_classification_targets(X, betas=CLASSIFICATION_BETAS, seed=0, label_rule="bernoulli"):
    """Return ``(probabilities, labels)``.

    ``bernoulli`` draws each label from its probability; ``threshold`` labels a
    row positive when its probability exceeds 1/2.
    """
    prob = logistic_function(X, betas)
    if label_rule == "bernoulli":
        rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
        labels = (rng.random(prob.shape[0]) < prob).astype(float)
    elif label_rule == "threshold":
        labels = (prob > 0.5).astype(float)
    else:
        raise PESError(f"label_rule must be one of {LABEL_RULES}")
    return prob, labels


@dataclass
class CorruptionSpec:
    mode: str
    level: float = 0.0
    columns: str | list[str] = "all"
    seed: int = 0

    def __post_init__(self):
        if self.mode not in CORRUPTION_MODES:
            raise PESError(f"corruption mode must be one of {CORRUPTION_MODES}, got {self.mode!r}")
        self.level = float(self.level)
        if self.mode == "gaussian_noise" and not self.level >= 0:
            raise PESError(f"noise level must be >= 0, got {self.level}")
        if self.mode == "mcar_impute" and not 0 <= self.level < 1:
            raise PESError(f"missing fraction must lie in [0, 1), got {self.level}")
        if self.columns != "all":
            self.columns = list(self.columns)

    def column_indices(self, column_names: Sequence[str] | None, p: int) -> list[int]:
        if self.columns == "all":
            return list(range(p))
        if column_names is None:
            raise PESError("column names required to select corrupted columns")
        names = list(column_names)
        missing = [c for c in self.columns if c not in names]
        if missing:
            raise PESError(f"unknown columns {missing}")
        return [names.index(c) for c in self.columns]

    def to_dict(self) -> dict:
        return {"mode": self.mode, "level": self.level, "columns": self.columns, "seed": self.seed}


def _rng(spec):
    return np.random.default_rng(spec.seed)


def add_gaussian_noise(X, spec: CorruptionSpec, column_names=None, rng=None) -> np.ndarray:
    if spec.mode != "gaussian_noise":
        raise PESError(f"expected a gaussian_noise spec, got {spec.mode}")
    X = np.array(X, dtype=float)
    if spec.level == 0:
        return X
    rng = _rng(spec) if rng is None else rng
    cols = spec.column_indices(column_names, X.shape[1])
    X[:, cols] += rng.normal(0.0, spec.level, size=(X.shape[0], len(cols)))
    return X


def mcar_impute(X, spec: CorruptionSpec, column_names=None, rng=None, return_mask=False):
    """Mask cells completely at random, then fill them with the observed column mean."""
    if spec.mode != "mcar_impute":
        raise PESError(f"expected an mcar_impute spec, got {spec.mode}")
    X = np.array(X, dtype=float)
    mask = np.zeros(X.shape, dtype=bool)
    if spec.level > 0:
        rng = _rng(spec) if rng is None else rng
        cols = spec.column_indices(column_names, X.shape[1])
        mask[:, cols] = rng.random((X.shape[0], len(cols))) < spec.level
        for j in cols:
            observed = ~mask[:, j]
            if not observed.any():
                name = column_names[j] if column_names is not None else j
                raise PESError(f"column {name!r} fully masked; cannot impute")
            X[mask[:, j], j] = X[observed, j].mean()
    return (X, mask) if return_mask else X


def corrupt(X, spec: CorruptionSpec, column_names=None, rng=None) -> np.ndarray:
    if spec.mode == "gaussian_noise":
        return add_gaussian_noise(X, spec, column_names, rng)
    return mcar_impute(X, spec, column_names, rng)


def split_indices(n, sizes, seed=0):
    sizes = [int(s) for s in sizes]
    if len(sizes) != 3 or any(s < 0 for s in sizes) or sum(sizes) != n:
        raise PESError(f"split sizes {sizes} must be three counts summing to {n}")
    if min(sizes) == 0:
        raise PESError(f"every split must be non-empty, got {sizes}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    perm = rng.permutation(n)
    a, b = sizes[0], sizes[0] + sizes[1]
    return perm[:a], perm[a:b], perm[b:]


def split(X, Y, sizes=(600, 200, 200), seed=0):
    """Seeded permutation cut into contiguous train/validation/test parts."""
    X = np.asarray(X)
    Y = np.asarray(Y)
    if X.shape[0] != Y.shape[0]:
        raise DimensionError("X and Y row counts differ")
    parts = split_indices(X.shape[0], sizes, seed)
    return tuple((X[idx], Y[idx]) for idx in parts)
