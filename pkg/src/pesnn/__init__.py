"""Feed-forward networks trained with pooled-effect-size penalties."""

__version__ = "0.1.0"

from .constraints import (LossWeights, PESConstraint, composite_loss, default_perturbation,
                          lambda_weights, lmeta_or, lmeta_rr, lmeta_src, perturb)
from .explain import ShapReport, delta_shap, exact_shapley, reference_shapley, shapley_values
from .metrics import r2, roc_auc
from .nn import (DataMatrix, MLPParams, Standardizer, adam_step, apply_standardizer,
                 fit_standardizer, forward, loss_and_grad)
from .trainer import TrainConfig, TrainedModel, evaluate, train

__all__ = [
    "DataMatrix", "LossWeights", "MLPParams", "PESConstraint", "ShapReport", "Standardizer",
    "TrainConfig", "TrainedModel", "adam_step", "apply_standardizer", "composite_loss",
    "default_perturbation", "delta_shap", "evaluate", "exact_shapley", "fit_standardizer",
    "forward", "lambda_weights", "lmeta_or", "lmeta_rr", "lmeta_src", "loss_and_grad",
    "perturb", "r2", "reference_shapley", "roc_auc", "shapley_values", "train",
]
