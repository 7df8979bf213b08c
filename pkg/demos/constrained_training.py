"""
Training with an effect-size constraint
=======================================

Fit the same network twice on data where fish intake is measured with noise:
once on the prediction loss alone, once with a standardized-slope constraint
telling it that one unit of fish intake lowers the outcome by 2.
"""
import numpy as np

from pesnn import (DataMatrix, LossWeights, PESConstraint, TrainConfig, evaluate, train)
from pesnn.synth import (CorruptionSpec, REGRESSION_COLUMNS, add_gaussian_noise,
                         gen_regression_targets, regression_scenario, sample_mvn, split)

# 1000 correlated rows; mercury and fish intake share a 0.8 correlation
X = sample_mvn(regression_scenario(seed=0, m=1000))
y = gen_regression_targets(X)
(Xtr, ytr), (Xva, yva), (Xte, yte) = split(X, y, (600, 200, 200), seed=0)

# measurement noise on fish intake, train and validation only
noise = CorruptionSpec("gaussian_noise", 0.75, columns=["fish_intake"])
rng = np.random.default_rng(1)
Xtr_noisy = add_gaussian_noise(Xtr, noise, REGRESSION_COLUMNS, rng)
Xva_noisy = add_gaussian_noise(Xva, noise, REGRESSION_COLUMNS, rng)

train_set = DataMatrix(Xtr_noisy, REGRESSION_COLUMNS, ytr)
val_set = DataMatrix(Xva_noisy, REGRESSION_COLUMNS, yva)

# constraint values here are per raw unit of the feature
config = TrainConfig(seed=0, constraint_units="raw")
agnostic = train(train_set, val_set, weights=LossWeights(1.0), config=config)
constrained = train(train_set, val_set, [PESConstraint("SRC", "fish_intake", -2.0)],
                    LossWeights(0.1, [0.9]), config)


def fish_slope(model):
    # average change in prediction when fish intake goes up by one
    step = np.array([0.0, 1.0, 0.0, 0.0])
    return float(np.mean(model.predict(Xte + step) - model.predict(Xte)))


for name, model in [("agnostic", agnostic), ("constrained", constrained)]:
    r2 = evaluate(model, Xte, yte)["metric"].value
    print(f"{name:12s} test R2 {r2:.3f}  fish slope {fish_slope(model):+.2f}"
          f"  (stopped at epoch {model.stopped_epoch})")

# the agnostic slope is pulled toward zero by the noise and mercury soaks up the rest
