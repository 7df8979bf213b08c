import itertools
from math import factorial

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pesnn.errors import DimensionError, PESError
from pesnn.explain import (MAX_FEATURES, ShapReport, background_sample, delta_shap, exact_shapley,
                           reference_shapley, shapley_values)


def permutation_shapley(predict, x, background):
    """Average marginal contribution over every feature ordering."""
    p = x.shape[0]

    def value(present):
        Z = background.copy()
        Z[:, list(present)] = x[list(present)]
        return predict(Z).mean()

    phi = np.zeros(p)
    for order in itertools.permutations(range(p)):
        present = []
        for j in order:
            before = value(present)
            present.append(j)
            phi[j] += value(present) - before
    return phi / factorial(p)


def nonlinear(A):
    return np.sin(A[:, 0]) * A[:, 1] + A[:, 2] ** 2 - 0.5 * A[:, 0] * A[:, 2]


def test_matches_permutation_oracle():
    rng = np.random.default_rng(0)
    bg = rng.normal(size=(15, 3))
    for x in rng.normal(size=(4, 3)):
        np.testing.assert_allclose(exact_shapley(nonlinear, x, bg),
                                   permutation_shapley(nonlinear, x, bg), atol=1e-12)


def test_linear_closed_form():
    rng = np.random.default_rng(1)
    beta = np.array([1.0, -2.0, 5.0, 0.3])
    X, bg = rng.normal(size=(6, 4)), rng.normal(size=(30, 4))
    phi = shapley_values(lambda A: 2.0 + A @ beta, X, bg)
    np.testing.assert_allclose(phi, beta * (X - bg.mean(0)), atol=1e-12)


def test_constant_predictor_has_zero_values():
    X = np.random.default_rng(2).normal(size=(3, 4))
    np.testing.assert_array_equal(shapley_values(lambda A: np.full(len(A), 4.2), X, X), 0)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31), st.integers(1, 5))
def test_efficiency(seed, p):
    rng = np.random.default_rng(seed)
    w = rng.normal(size=p)
    f = lambda A: np.tanh(A @ w) + (A[:, 0] * A[:, -1])
    X, bg = rng.normal(size=(3, p)), rng.normal(size=(8, p))
    phi = shapley_values(f, X, bg)
    np.testing.assert_allclose(phi.sum(1), f(X) - f(bg).mean(), atol=1e-9)


def test_symmetry_and_dummy():
    rng = np.random.default_rng(3)
    f = lambda A: np.exp(0.3 * (A[:, 0] + A[:, 1])) + A[:, 0] * A[:, 1]
    bg = rng.normal(size=(10, 3))
    bg[:, 1] = bg[:, 0]
    x = np.array([0.7, 0.7, -2.0])
    phi = exact_shapley(f, x, bg)
    assert phi[0] == pytest.approx(phi[1], abs=1e-9)
    assert phi[2] == pytest.approx(0.0, abs=1e-12)


def test_linearity():
    rng = np.random.default_rng(4)
    g = lambda A: A[:, 0] * A[:, 1]
    h = lambda A: np.cos(A[:, 2]) + A[:, 0]
    X, bg = rng.normal(size=(5, 3)), rng.normal(size=(12, 3))
    combo = shapley_values(lambda A: 2 * g(A) - 3 * h(A), X, bg)
    np.testing.assert_allclose(combo, 2 * shapley_values(g, X, bg) - 3 * shapley_values(h, X, bg),
                               atol=1e-9)


def test_chunking_does_not_change_values():
    rng = np.random.default_rng(5)
    X, bg = rng.normal(size=(7, 3)), rng.normal(size=(9, 3))
    np.testing.assert_allclose(shapley_values(nonlinear, X, bg, chunk_rows=2),
                               shapley_values(nonlinear, X, bg), atol=1e-14)


def test_reference_shapley_accepts_vector_or_matrix():
    rng = np.random.default_rng(6)
    X, bg = rng.normal(size=(3, 3)), rng.normal(size=(5, 3))
    np.testing.assert_allclose(reference_shapley(nonlinear, X[0], bg),
                               reference_shapley(nonlinear, X, bg)[0])


def test_delta_shap_examples():
    per, total = delta_shap(np.zeros((4, 2)), np.full((4, 2), 0.5))
    np.testing.assert_allclose(per, [0.5, 0.5])
    assert total == pytest.approx(1.0)
    per, _ = delta_shap([[1.0]], [[-1.0]])
    assert per[0] == 2.0
    with pytest.raises(DimensionError):
        delta_shap(np.zeros((2, 2)), np.zeros((2, 3)))


def test_feature_cap_and_validation():
    wide = np.zeros((1, MAX_FEATURES + 1))
    with pytest.raises(PESError):
        shapley_values(lambda A: A[:, 0], wide, wide)
    with pytest.raises(DimensionError):
        shapley_values(lambda A: A[:, 0], np.zeros((1, 2)), np.zeros((3, 3)))
    with pytest.raises(PESError):
        shapley_values(lambda A: A[:, 0], np.zeros((1, 2)), np.zeros((0, 2)))


def test_report_csv(tmp_path):
    rep = ShapReport(["a", "b"], np.ones((2, 2)), np.zeros((2, 2)), np.ones((2, 2)))
    assert rep.delta_by_feature() == {"a": 1.0, "b": 1.0}
    assert rep.sum_delta_shap == 2.0
    rep.to_csv(tmp_path / "s.csv")
    lines = (tmp_path / "s.csv").read_text().splitlines()
    assert lines[0] == "test_row,feature,x,phi_model,phi_reference"
    assert len(lines) == 5


def test_background_sample():
    idx = background_sample(np.zeros((500, 2)), 100, seed=1)
    assert len(set(idx.tolist())) == 100 and np.all(np.diff(idx) > 0)
    np.testing.assert_array_equal(idx, background_sample(np.zeros((500, 2)), 100, seed=1))
    np.testing.assert_array_equal(background_sample(np.zeros((5, 2)), 100), np.arange(5))
