"""Soft-margin RBF support vector machines, one-vs-rest over four classes.

The binary dual

    min_a  1/2 a^T Q a - sum(a),  Q_ij = y_i y_j K(x_i, x_j)
    s.t.   0 <= a_i <= C,  sum(a_i y_i) = 0

is solved by SMO with second-order working-set selection; the loop lives in
``_kernels.smo_solve``.
"""
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _kernels
from .errors import DomainError

SV_EPS = 1e-12


@dataclass(frozen=True)
class RbfParams:
    sigma: float = 1.0
    c: float = 1.0

    def __post_init__(self):
        if not self.sigma > 0 or not self.c > 0:
            raise DomainError("sigma and c must be positive")

    @property
    def gamma(self):
        return 1.0 / (2.0 * self.sigma * self.sigma)


@dataclass(frozen=True)
class SolverParams:
    tolerance: float = 1e-3
    max_passes: int = 50  # iteration cap = max_passes * n
    cache_rows: int = 2000


def rbf_kernel(p1, p2, sigma):
    """``exp(-||p1 - p2||^2 / (2 sigma^2))``."""
    a = np.asarray(p1, dtype=np.float64)
    b = np.asarray(p2, dtype=np.float64)
    if a.shape != b.shape:
        raise DomainError(f"kernel arguments differ in shape: {a.shape} vs {b.shape}")
    if not sigma > 0:
        raise DomainError("sigma must be positive")
    return float(np.exp(-np.sum((a - b) ** 2) / (2.0 * sigma * sigma)))


def rbf_matrix(A, B, gamma):
    """Kernel matrix between row sets ``A`` (m, d) and ``B`` (n, d)."""
    sa = np.einsum("ij,ij->i", A, A)
    sb = np.einsum("ij,ij->i", B, B)
    d2 = sa[:, None] + sb[None, :] - 2.0 * (A @ B.T)
    return np.exp(-gamma * np.maximum(d2, 0.0))


@dataclass
class BinarySvm:
    support_vectors: np.ndarray  # (s, d)
    dual_coef: np.ndarray  # alpha_i * y_i, (s,)
    bias: float
    params: RbfParams
    support_index: np.ndarray  # rows of the training matrix
    converged: bool = True
    n_iter: int = 0
    degenerate: bool = False
    alpha: Optional[np.ndarray] = None  # full dual vector over training rows

    @property
    def n_support(self):
        return int(self.support_vectors.shape[0])

    def decision(self, X, chunk=2048):
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if self.degenerate or self.n_support == 0:
            return np.full(X.shape[0], self.bias)
        out = np.empty(X.shape[0])
        for s in range(0, X.shape[0], chunk):
            k = rbf_matrix(X[s:s + chunk], self.support_vectors, self.params.gamma)
            out[s:s + chunk] = k @ self.dual_coef + self.bias
        return out


def dual_objective(alpha, X, y, params):
    """``1/2 a^T Q a - sum(a)`` for a dual vector over ``X``."""
    K = rbf_matrix(X, X, params.gamma)
    ay = alpha * y
    return 0.5 * float(ay @ K @ ay) - float(alpha.sum())


def fit_binary(X, y, params=RbfParams(), solver=SolverParams()):
    """Train on labels in {-1, +1}."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise DomainError("rows and labels differ in length")
    if not np.all(np.isin(y, (-1.0, 1.0))):
        raise DomainError("binary labels must be -1 or +1")
    if not (np.any(y > 0) and np.any(y < 0)):
        raise DomainError("binary SVM needs both classes present")
    n = y.shape[0]
    max_iter = max(1, int(solver.max_passes) * n)
    alpha, rho, n_iter, converged = _kernels.smo_solve(
        X, y, params.c, params.gamma, solver.tolerance, max_iter, solver.cache_rows)
    alpha = np.clip(alpha, 0.0, params.c)
    sv = np.nonzero(alpha > SV_EPS)[0]
    return BinarySvm(
        support_vectors=X[sv].copy(),
        dual_coef=(alpha * y)[sv],
        bias=-float(rho),
        params=params,
        support_index=sv,
        converged=bool(converged),
        n_iter=int(n_iter),
        alpha=alpha,
    )


@dataclass
class MulticlassSvm:
    machines: list  # one BinarySvm per class code 1..K
    means: np.ndarray
    scales: np.ndarray
    params: RbfParams
    classes: tuple = (1, 2, 3, 4)

    @property
    def n_features(self):
        return self.means.shape[0]

    def stats(self):
        return {
            "support_vectors": {str(c): m.n_support for c, m in zip(self.classes, self.machines)},
            "converged": {str(c): m.converged for c, m in zip(self.classes, self.machines)},
            "degenerate": {str(c): m.degenerate for c, m in zip(self.classes, self.machines)},
            "iterations": {str(c): m.n_iter for c, m in zip(self.classes, self.machines)},
            "sigma": self.params.sigma,
            "c": self.params.c,
        }

    def standardize(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.n_features:
            raise DomainError(f"expected {self.n_features} features, got {X.shape[1]}")
        return (X - self.means) / self.scales

    def decision_values(self, X):
        """(n, K) per-class decision values; degenerate machines give -inf."""
        Z = self.standardize(X)
        cols = []
        for m in self.machines:
            cols.append(np.full(Z.shape[0], -np.inf) if m.degenerate else m.decision(Z))
        return np.column_stack(cols)


def default_sigma(d):
    return math.sqrt(d / 2.0)


def fit_multiclass(train, params=None, solver=SolverParams(), labels=None, classes=(1, 2, 3, 4)):
    """One machine per class (class vs rest) on standardized features."""
    if labels is None:
        X, codes = train.matrix, train.labels
    else:
        X, codes = train, labels
    X = np.asarray(X, dtype=np.float64)
    codes = np.asarray(codes)
    present = [c for c in classes if np.any(codes == c)]
    if len(present) < 2:
        raise DomainError("multiclass SVM needs at least two classes present")
    params = params or RbfParams(sigma=default_sigma(X.shape[1]))
    means = X.mean(axis=0)
    sd = X.std(axis=0)
    scales = np.where(sd > 0, sd, 1.0)
    Z = np.ascontiguousarray((X - means) / scales)
    machines = []
    for c in classes:
        y = np.where(codes == c, 1.0, -1.0)
        if c not in present:
            machines.append(BinarySvm(
                support_vectors=np.empty((0, X.shape[1])), dual_coef=np.empty(0), bias=-1.0,
                params=params, support_index=np.empty(0, dtype=np.int64), degenerate=True))
            continue
        machines.append(fit_binary(Z, y, params, solver))
    return MulticlassSvm(machines, means, scales, params, tuple(classes))


def predict_svm(model, X):
    """Class with the largest decision value; ties to the lowest code."""
    X = np.asarray(X, dtype=np.float64)
    single = X.ndim == 1
    dv = model.decision_values(np.atleast_2d(X))
    out = np.asarray(model.classes)[np.argmax(dv, axis=1)]
    return int(out[0]) if single else out
