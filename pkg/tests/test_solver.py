import math

import numpy as np
import pytest

from olcwa.errors import DegenerateBatch, DimensionMismatch, EmptyBatch
from olcwa.geometry import ParamVector
from olcwa.solver import (
    MiniBatch,
    SolverConfig,
    accuracy,
    fit_logistic,
    kpi_accuracy,
    kpi_logloss,
    logloss,
    minimize_nll,
    nll_gradient,
    nll_objective,
    predict_proba,
    sigmoid,
)


def irls(X, y, l2, iters=50):
    """Newton's method on the same penalized objective."""
    n, d = X.shape
    A = np.hstack([X, np.ones((n, 1))])
    w = np.zeros(d + 1)
    for _ in range(iters):
        p = sigmoid(A @ w)
        g = A.T @ (p - y) / n + l2 * w
        H = (A * (p * (1 - p))[:, None]).T @ A / n + l2 * np.eye(d + 1)
        w = w - np.linalg.solve(H, g)
    return w


def overlapping_batch(rng, n=60, d=3):
    X = rng.normal(size=(n, d))
    y = (X @ rng.normal(size=d) + rng.normal(scale=1.5, size=n) > 0).astype(int)
    return X, y


def test_minibatch_validation():
    with pytest.raises(EmptyBatch):
        MiniBatch(np.zeros((0, 2)), np.zeros(0, dtype=int))
    with pytest.raises(DimensionMismatch):
        MiniBatch(np.zeros((3, 2)), np.zeros(2, dtype=int))
    with pytest.raises(ValueError):
        MiniBatch(np.array([[np.inf, 0.0]]), np.array([1]))
    with pytest.raises(ValueError):
        MiniBatch(np.zeros((2, 1)), np.array([0.5, 1.0]))


def test_minibatch_column_vector_and_relabel():
    b = MiniBatch(np.array([1.0, 2.0, 3.0]), np.array([0, 2, 1]))
    assert b.dim == 1 and len(b) == 3
    assert list(b.relabel(2).labels) == [0, 1, 0]
    assert not b.is_binary()


def test_sigmoid_is_stable_at_extremes():
    s = sigmoid(np.array([-1000.0, 0.0, 1000.0]))
    assert np.all(np.isfinite(s))
    assert s[1] == 0.5 and s[0] == 0.0 and s[2] == 1.0


def test_gradient_matches_central_differences():
    rng = np.random.default_rng(0)
    for _ in range(10):
        X, y = overlapping_batch(rng)
        w = rng.normal(size=X.shape[1] + 1)
        g = nll_gradient(w, X, y, 1e-3)
        h = 1e-6
        num = np.array([
            (nll_objective(w + h * e, X, y, 1e-3) - nll_objective(w - h * e, X, y, 1e-3)) / (2 * h)
            for e in np.eye(w.size)
        ])
        assert np.linalg.norm(g - num) <= 1e-5 * max(1.0, np.linalg.norm(num))


def test_fit_matches_irls_direction():
    rng = np.random.default_rng(1)
    cfg = SolverConfig()
    for _ in range(20):
        X, y = overlapping_batch(rng)
        w = fit_logistic(MiniBatch(X, y), cfg)
        ref = irls(X, y.astype(float), cfg.l2_reg)
        cos = w.weights @ ref[:-1] / (np.linalg.norm(w.weights) * np.linalg.norm(ref[:-1]))
        assert 1.0 - cos <= 1e-3


def test_objective_history_never_increases():
    rng = np.random.default_rng(2)
    X, y = overlapping_batch(rng)
    res = minimize_nll(X, y.astype(float))
    assert all(b <= a + 1e-15 for a, b in zip(res.history, res.history[1:]))


def test_converges_on_overlapping_data():
    rng = np.random.default_rng(4)
    X, y = overlapping_batch(rng, n=200)
    res = minimize_nll(X, y.astype(float))
    assert res.converged


def test_warm_start_at_optimum_stops_immediately():
    rng = np.random.default_rng(5)
    X, y = overlapping_batch(rng, n=200)
    first = minimize_nll(X, y.astype(float))
    again = minimize_nll(X, y.astype(float), w0=first.w)
    assert again.n_iter == 0 and again.converged


def test_single_class_without_penalty_is_degenerate():
    X = np.random.default_rng(0).normal(size=(10, 2))
    with pytest.raises(DegenerateBatch):
        minimize_nll(X, np.ones(10), SolverConfig(l2_reg=0.0))


def test_single_class_with_penalty_has_finite_fit():
    X = np.random.default_rng(0).normal(loc=1.0, size=(10, 2))
    w = fit_logistic(MiniBatch(X, np.ones(10, dtype=int)))
    assert np.all(np.isfinite(w.as_array()))
    assert np.all(predict_proba(w, X) > 0.5)


def test_warm_start_dimension_check():
    b = MiniBatch(np.zeros((4, 2)), np.array([0, 1, 0, 1]))
    with pytest.raises(DimensionMismatch):
        fit_logistic(b, warm_start=ParamVector([1.0, 1.0, 1.0], 0.0))


def test_fit_separable_batch_classifies_perfectly():
    X = np.array([[-2.0, 0.0], [-1.0, 0.5], [1.0, -0.5], [2.0, 0.0]])
    y = np.array([0, 0, 1, 1])
    w = fit_logistic(MiniBatch(X, y))
    assert kpi_accuracy(w, MiniBatch(X, y)) == 1.0


def test_predict_proba_clamped_open_interval():
    w = ParamVector([1000.0], 0.0)
    p = predict_proba(w, np.array([[-10.0], [10.0]]))
    assert 0.0 < p[0] < 1e-300 and p[1] < 1.0


def test_accuracy_threshold_at_half():
    assert accuracy(np.array([1, 0]), np.array([0.5, 0.49])) == 1.0


def test_logloss_values():
    assert math.isclose(logloss(np.array([1, 0]), np.array([0.5, 0.5])), math.log(2))
    # clamped: a confident miss costs -log(1e-15)
    assert math.isclose(logloss(np.array([1]), np.array([0.0])), -math.log(1e-15))


def test_kpis_on_empty_inputs():
    with pytest.raises(EmptyBatch):
        accuracy(np.array([]), np.array([]))
    with pytest.raises(EmptyBatch):
        logloss(np.array([]), np.array([]))


def test_kpi_logloss_matches_direct_formula():
    rng = np.random.default_rng(7)
    X, y = overlapping_batch(rng)
    w = ParamVector(rng.normal(size=3), 0.3)
    p = sigmoid(X @ w.weights + w.bias)
    ref = -np.mean(y * np.log(p) + (1 - y) * np.log(1 - p))
    assert math.isclose(kpi_logloss(w, MiniBatch(X, y)), ref, rel_tol=1e-12)


def test_solver_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(max_iters=0)
    with pytest.raises(ValueError):
        SolverConfig(l2_reg=-1.0)
