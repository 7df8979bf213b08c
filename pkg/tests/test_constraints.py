import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pesnn.constraints import (LossWeights, PESConstraint, ResolvedConstraint, composite_loss,
                               default_perturbation, lambda_weights, lmeta_or, lmeta_rr,
                               lmeta_src, perturb, prediction_loss, resolve)
from pesnn.errors import ConstraintError, DimensionError, PESError, TrainingDivergenceError
from pesnn.nn import sigmoid

finite = st.floats(-5, 5, allow_nan=False)


def test_default_perturbation_rules():
    assert default_perturbation("SRC", -3.0) == 1.0
    assert default_perturbation("OR", 2.0) == 0.5
    assert default_perturbation("RR", 0.0) == 1.0
    assert default_perturbation("rr", -4.0) == -0.25
    with pytest.raises(ConstraintError):
        default_perturbation("OR", 5e-324)
    with pytest.raises(ConstraintError):
        perturb(np.zeros((1, 1)), 0, float("inf"))


def test_constraint_validation():
    with pytest.raises(ConstraintError):
        PESConstraint("XYZ", "a", 1.0)
    with pytest.raises(ConstraintError):
        PESConstraint("SRC", "a", 1.0, confidence=1.0)
    with pytest.raises(ConstraintError):
        PESConstraint("SRC", "a", 1.0, perturbation=0.0)
    with pytest.raises(ConstraintError):
        PESConstraint("SRC", "a", float("inf"))


def test_perturbation_override_and_rescale():
    c = PESConstraint("OR", "a", 2.0)
    assert c.h == 0.5
    assert c.rescaled(2.0).h == 0.25  # default rule follows the rescaled value
    assert PESConstraint("OR", "a", 2.0, perturbation=3.0).rescaled(2.0).h == 3.0


def test_from_ratio_stores_log():
    assert PESConstraint.from_ratio("OR", "a", math.e).value == pytest.approx(1.0)
    with pytest.raises(ConstraintError):
        PESConstraint.from_ratio("OR", "a", 0.0)


def test_resolve_requires_single_match():
    assert resolve([PESConstraint("SRC", "b", 1.0)], ["a", "b"])[0].column == 1
    with pytest.raises(ConstraintError):
        resolve([PESConstraint("SRC", "z", 1.0)], ["a", "b"])


def test_perturb_basic():
    X = np.array([[1.0, 2.0], [3.0, 4.0]])
    np.testing.assert_array_equal(perturb(X, 1, 0.5), [[1.0, 2.5], [3.0, 4.5]])
    np.testing.assert_array_equal(X, [[1.0, 2.0], [3.0, 4.0]])
    with pytest.raises(ConstraintError):
        perturb(X, 0, 0.0)
    with pytest.raises(DimensionError):
        perturb(X, 2, 1.0)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**31), st.sampled_from([0.5, 1.0, 0.25, -2.0]))
def test_perturb_round_trip(seed, h):
    X = np.random.default_rng(seed).integers(-100, 100, size=(5, 3)).astype(float)
    np.testing.assert_array_equal(perturb(perturb(X, 1, h), 1, -h), X)


def test_src_slope_mismatch():
    X = np.random.default_rng(0).normal(size=(20, 2))
    assert lmeta_src(lambda A: 2 * A[:, 0], X, 0, 1.0) == pytest.approx(1.0)
    assert lmeta_src(lambda A: np.zeros(len(A)), X, 0, 1.0) == pytest.approx(1.0)
    assert lmeta_src(lambda A: 2 * A[:, 0] + 3 * A[:, 1], X, 0, 2.0) == pytest.approx(0.0, abs=1e-20)


def test_or_penalty_hand_values():
    X = np.random.default_rng(0).normal(size=(20, 2))
    half = lambda A: np.full(len(A), 0.5)
    assert lmeta_or(half, X, 0, 1.0, h=1.0) == pytest.approx((sigmoid(1.0) - 0.5) ** 2)
    assert lmeta_or(half, X, 0, 1.0, h=1.0) == pytest.approx(0.053388, abs=1e-6)
    exact = lambda A: sigmoid(0.3 + 1.5 * A[:, 0] - A[:, 1])
    assert lmeta_or(exact, X, 0, 1.5) < 1e-10


def test_or_penalty_needs_probabilities():
    X = np.zeros((3, 1))
    with pytest.raises(TrainingDivergenceError):
        lmeta_or(lambda A: np.ones(len(A)), X, 0, 1.0)


def test_rr_penalty_hand_values():
    X = np.random.default_rng(0).normal(size=(20, 2))
    one = lambda A: np.ones(len(A))
    assert lmeta_rr(one, X, 0, 1.0, h=1.0) == pytest.approx((math.exp(-1) - 1) ** 2)
    assert lmeta_rr(one, X, 0, 1.0, h=1.0) == pytest.approx(0.399576, abs=1e-6)
    exact = lambda A: 0.1 * np.exp(0.7 * A[:, 1])
    assert lmeta_rr(exact, X, 1, 0.7) == pytest.approx(0.0, abs=1e-25)
    with pytest.raises(TrainingDivergenceError):
        lmeta_rr(lambda A: -np.ones(len(A)), X, 0, 1.0)


@settings(max_examples=50, deadline=None)
@given(finite, finite, st.floats(-20, 20))
def test_src_invariant_under_additive_shift(a, v, shift):
    X = np.random.default_rng(1).normal(size=(10, 2))
    f = lambda A: a * A[:, 0] + np.sin(A[:, 1])
    g = lambda A: f(A) + shift
    assert lmeta_src(g, X, 0, v) == pytest.approx(lmeta_src(f, X, 0, v), rel=1e-9, abs=1e-9)


effect = st.one_of(st.just(0.0), st.floats(0.01, 2), st.floats(-2, -0.01))


@settings(max_examples=50, deadline=None)
@given(effect, st.floats(-2, 2))
def test_rr_zero_for_any_multiplicative_scale(v, log_scale):
    X = np.random.default_rng(2).normal(size=(10, 2))
    f = lambda A: math.exp(log_scale) * np.exp(v * A[:, 0] + 0.2 * A[:, 1])
    assert lmeta_rr(f, X, 0, v) == pytest.approx(0.0, abs=1e-12)


@settings(max_examples=50, deadline=None)
@given(effect, st.floats(-3, 3))
def test_or_zero_for_any_logit_offset(v, offset):
    X = np.random.default_rng(3).normal(size=(10, 2))
    f = lambda A: sigmoid(offset + v * A[:, 0] + 0.4 * A[:, 1])
    assert lmeta_or(f, X, 0, v) == pytest.approx(0.0, abs=1e-12)


def test_src_penalty_monotone_in_slope_error():
    X = np.random.default_rng(4).normal(size=(10, 1))
    vals = [lmeta_src(lambda A, s=s: s * A[:, 0], X, 0, 1.0) for s in (1.0, 1.5, 2.0, 3.0)]
    assert vals[0] == pytest.approx(0.0, abs=1e-20)
    assert all(a < b for a, b in zip(vals, vals[1:]))


def test_lambda_weights_examples():
    w = lambda_weights(math.e ** 2, [math.e ** 2])
    assert w.lambda0 == pytest.approx(0.5) and w.lambdas[0] == pytest.approx(0.5)
    w = lambda_weights(2400, [10000])
    assert w.lambda0 == pytest.approx(0.4581, abs=1e-4)
    assert w.lambdas[0] == pytest.approx(0.5419, abs=1e-4)
    w = lambda_weights(50, [50, 50])
    np.testing.assert_allclose([w.lambda0, *w.lambdas], [1 / 3] * 3)
    with pytest.raises(PESError):
        lambda_weights(1.0, [10.0])


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(1.5, 1e12), min_size=2, max_size=6), st.randoms(use_true_random=False))
def test_lambda_weights_sum_and_permutation(confs, rnd):
    w = lambda_weights(confs[0], confs[1:])
    assert abs(w.lambda0 + w.lambdas.sum() - 1) <= 1e-12
    order = list(range(1, len(confs)))
    rnd.shuffle(order)
    w2 = lambda_weights(confs[0], [confs[i] for i in order])
    np.testing.assert_allclose(w2.lambdas, w.lambdas[[i - 1 for i in order]], rtol=1e-12)


def test_loss_weights_validation():
    LossWeights(1.0, [])
    with pytest.raises(PESError):
        LossWeights(0.5, [0.4])
    with pytest.raises(PESError):
        LossWeights(0.0, [1.0])


def test_prediction_loss_values():
    assert prediction_loss("regression", [1.0, 2.0], [0.0, 0.0]) == pytest.approx(2.5)
    assert prediction_loss("classification", [0.5, 0.5], [1, 0]) == pytest.approx(math.log(2))
    with pytest.raises(TrainingDivergenceError):
        prediction_loss("classification", [1.0], [1])


def test_composite_loss_is_weighted_sum():
    rng = np.random.default_rng(5)
    X, Y = rng.normal(size=(30, 3)), rng.normal(size=30)
    f = lambda A: 0.5 + A[:, 0] ** 2 + 2 * A[:, 1]
    cons = [PESConstraint("SRC", "b", 1.0), PESConstraint("SRC", "a", -1.0, perturbation=0.5)]
    w = LossWeights(0.2, [0.5, 0.3])
    expected = (0.2 * np.mean((f(X) - Y) ** 2)
                + 0.5 * lmeta_src(f, X, 1, 1.0) + 0.3 * lmeta_src(f, X, 0, -1.0, h=0.5))
    got = composite_loss(f, X, Y, cons, w, "regression", ["a", "b", "c"])
    assert got == pytest.approx(expected, rel=1e-12)
    resolved = [ResolvedConstraint("SRC", 1, 1.0, 1.0), ResolvedConstraint("SRC", 0, -1.0, 0.5)]
    assert composite_loss(f, X, Y, resolved, w, "regression") == pytest.approx(got, rel=1e-15)


def test_composite_loss_weight_count_mismatch():
    with pytest.raises(PESError):
        composite_loss(lambda A: A[:, 0], np.zeros((2, 1)), np.zeros(2),
                       [ResolvedConstraint("SRC", 0, 1.0, 1.0)], LossWeights(1.0, []), "regression")


def test_constraint_dict_round_trip():
    c = PESConstraint("RR", "x", 0.3, 500.0, 2.0)
    assert PESConstraint.from_dict(c.to_dict()) == c
    with pytest.raises(ConstraintError):
        PESConstraint.from_dict({**c.to_dict(), "extra": 1})
