import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from nutriclass.errors import DomainError
from nutriclass.svm import (RbfParams, SolverParams, default_sigma, dual_objective, fit_binary,
                            fit_multiclass, predict_svm, rbf_kernel, rbf_matrix)

from oracles import brute_force_dual


def test_rbf_kernel_values():
    assert rbf_kernel([0, 0], [0, 0], 1.0) == 1.0
    assert rbf_kernel([0, 0], [1, 1], 1.0) == pytest.approx(math.exp(-1.0))
    assert rbf_kernel([1.0], [3.0], 2.0) == pytest.approx(math.exp(-4 / 8))
    with pytest.raises(DomainError):
        rbf_kernel([0], [0, 1], 1.0)
    with pytest.raises(DomainError):
        rbf_kernel([0], [1], 0.0)


def test_rbf_matrix_matches_pairwise(rng):
    A, B = rng.normal(size=(5, 3)), rng.normal(size=(4, 3))
    K = rbf_matrix(A, B, RbfParams(sigma=1.3).gamma)
    ref = [[rbf_kernel(a, b, 1.3) for b in B] for a in A]
    np.testing.assert_allclose(K, ref, rtol=1e-12)


@pytest.mark.parametrize("seed", range(8))
def test_dual_objective_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(3, 7))
    X = rng.normal(size=(n, 2))
    y = np.where(rng.random(n) < 0.5, 1.0, -1.0)
    y[0], y[1] = 1.0, -1.0
    params = RbfParams(sigma=float(rng.uniform(0.5, 2.0)), c=float(rng.uniform(0.3, 5.0)))
    m = fit_binary(X, y, params, SolverParams(tolerance=1e-8))
    got = dual_objective(m.alpha, X, y, params)
    opt = brute_force_dual(X, y, params.c, params.gamma)
    assert m.converged
    assert got == pytest.approx(opt, abs=1e-4)
    assert got >= opt - 1e-9


def test_xor_is_separated():
    X = np.array([[0, 0], [1, 1], [0, 1], [1, 0]], dtype=float)
    y = np.array([1, 1, -1, -1], dtype=float)
    m = fit_binary(X, y, RbfParams(sigma=0.5, c=10.0))
    assert np.all(np.sign(m.decision(X)) == y)
    assert m.n_support == 4


@given(st.integers(0, 10**6), st.integers(6, 60))
def test_dual_constraints_hold(seed, n):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, 3))
    y = np.where(X[:, 0] + 0.3 * rng.normal(size=n) > 0, 1.0, -1.0)
    if abs(y.sum()) == n:
        y[0] = -y[0]
    params = RbfParams(sigma=1.0, c=2.0)
    m = fit_binary(X, y, params)
    assert m.converged
    assert abs(np.sum(m.alpha * y)) <= 1e-6
    assert np.all((m.alpha >= 0) & (m.alpha <= params.c))


def test_kkt_conditions(rng):
    X = rng.normal(size=(80, 2))
    y = np.where(X[:, 0] * X[:, 1] > 0, 1.0, -1.0)
    params = RbfParams(sigma=0.8, c=3.0)
    tol = 1e-5
    m = fit_binary(X, y, params, SolverParams(tolerance=tol))
    f = m.decision(X)
    margin = y * f
    a = m.alpha
    free = (a > 1e-8) & (a < params.c - 1e-8)
    assert np.all(margin[a <= 1e-8] >= 1 - 10 * tol)
    assert np.all(margin[a >= params.c - 1e-8] <= 1 + 10 * tol)
    np.testing.assert_allclose(margin[free], 1.0, atol=10 * tol)


def test_decision_is_kernel_expansion(rng):
    X = rng.normal(size=(30, 2))
    y = np.where(X[:, 0] > 0, 1.0, -1.0)
    params = RbfParams(sigma=1.1)
    m = fit_binary(X, y, params)
    Xq = rng.normal(size=(5, 2))
    manual = [sum(m.alpha[i] * y[i] * rbf_kernel(X[i], q, 1.1) for i in range(30)) + m.bias for q in Xq]
    np.testing.assert_allclose(m.decision(Xq), manual, atol=1e-10)


def test_binary_errors():
    with pytest.raises(DomainError):
        fit_binary(np.zeros((3, 1)), np.ones(3))
    with pytest.raises(DomainError):
        fit_binary(np.zeros((3, 1)), np.array([1.0, 0.0, -1.0]))


def test_iteration_cap_reports_non_convergence(rng):
    X = rng.normal(size=(50, 2))
    y = np.where(X[:, 0] > 0, 1.0, -1.0)
    m = fit_binary(X, y, RbfParams(), SolverParams(max_passes=0))
    assert not m.converged and m.n_iter == 1


def test_multiclass_one_vs_rest(small_split):
    train, test = small_split
    model = fit_multiclass(train)
    assert model.params.sigma == default_sigma(20)
    pred = predict_svm(model, test.matrix)
    assert np.mean(pred == test.labels) > 0.85
    dv = model.decision_values(test.matrix)
    np.testing.assert_array_equal(pred, np.argmax(dv, axis=1) + 1)
    assert all(model.stats()["converged"].values())


def test_multiclass_absent_class_is_never_predicted(rng):
    X = rng.normal(size=(60, 2))
    y = np.where(X[:, 0] > 0, 1, 3)
    model = fit_multiclass(X, labels=y)
    assert model.machines[1].degenerate and model.machines[3].degenerate
    pred = predict_svm(model, rng.normal(size=(100, 2)))
    assert set(pred.tolist()) <= {1, 3}
    with pytest.raises(DomainError):
        fit_multiclass(X, labels=np.ones(60, dtype=int))
