"""Independent reference computations used by the test suites."""
import itertools
import math

import mpmath
import numpy as np

from nutriclass.mlp import MlpArchitecture, backward, cross_entropy, forward, init_model
from nutriclass.numeric import Rng

mpmath.mp.dps = 50


# MLP gradients by central differences

def numeric_grad(model, X, y, h=1e-5):
    grads = []
    for p in model.params:
        g = np.zeros_like(p)
        flat, gf = p.reshape(-1), g.reshape(-1)
        for i in range(flat.size):
            old = flat[i]
            flat[i] = old + h
            up = cross_entropy(forward(model, X), y)
            flat[i] = old - h
            down = cross_entropy(forward(model, X), y)
            flat[i] = old
            gf[i] = (up - down) / (2 * h)
        grads.append(g)
    return grads


def relative_error(a, b):
    a = np.concatenate([g.ravel() for g in a])
    b = np.concatenate([g.ravel() for g in b])
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(a) + np.linalg.norm(b), 1e-30))


def random_case(seed):
    rs = np.random.default_rng(seed)
    depth = int(rs.integers(1, 4))
    widths = [int(rs.integers(2, 7))] + [int(rs.integers(2, 8)) for _ in range(depth)] + [4]
    model = init_model(MlpArchitecture(tuple(widths)), Rng(seed))
    for b in model.biases:
        b[...] = rs.normal(scale=0.1, size=b.shape)
    batch = int(rs.integers(1, 9))
    X = rs.normal(size=(batch, widths[0]))
    y = rs.integers(1, 5, size=batch)
    return model, X, y


def check_case(seed, h=1e-5):
    model, X, y = random_case(seed)
    return relative_error(backward(model, X, y), numeric_grad(model, X, y, h))


# SVM dual optimum by exhaustive active-set enumeration

def brute_force_dual(X, y, c, gamma):
    """Exact optimum: enumerate lower/upper/free status for every multiplier."""
    n = len(y)
    K = np.array([[math.exp(-gamma * sum((a - b) ** 2 for a, b in zip(u, v))) for v in X] for u in X])
    Q = (y[:, None] * y[None, :]) * K
    best = np.inf
    for status in itertools.product((0, 1, 2), repeat=n):  # 0 -> 0, 1 -> C, 2 -> free
        a = np.array([0.0 if s == 0 else c for s in status])
        free = [i for i, s in enumerate(status) if s == 2]
        bound = [i for i, s in enumerate(status) if s != 2]
        if free:
            F = np.array(free)
            B = np.array(bound, dtype=int)
            m = len(F)
            M = np.zeros((m + 1, m + 1))
            M[:m, :m] = Q[np.ix_(F, F)]
            M[:m, m] = y[F]
            M[m, :m] = y[F]
            rhs = np.zeros(m + 1)
            rhs[:m] = 1.0 - (Q[np.ix_(F, B)] @ a[B] if B.size else 0.0)
            rhs[m] = -(y[B] @ a[B]) if B.size else 0.0
            sol = np.linalg.lstsq(M, rhs, rcond=None)[0]
            if not np.allclose(M @ sol, rhs, atol=1e-9):
                continue
            a[F] = sol[:m]
            if np.any(a[F] < -1e-12) or np.any(a[F] > c + 1e-12):
                continue
        if abs(y @ a) > 1e-9:
            continue
        best = min(best, 0.5 * a @ Q @ a - a.sum())
    return best


# Pearson r in 50-digit arithmetic

def pearson_mp(x, y):
    x = [mpmath.mpf(float(v)) for v in x]
    y = [mpmath.mpf(float(v)) for v in y]
    mx, my = mpmath.fsum(x) / len(x), mpmath.fsum(y) / len(y)
    sxy = mpmath.fsum((a - mx) * (b - my) for a, b in zip(x, y))
    sxx = mpmath.fsum((a - mx) ** 2 for a in x)
    syy = mpmath.fsum((b - my) ** 2 for b in y)
    return sxy / mpmath.sqrt(sxx * syy)


# best split by scoring every midpoint

def _bits(counts):
    n = sum(counts)
    return -sum(c / n * math.log2(c / n) for c in counts if c)


def _gain(parent, left, right):
    n = sum(parent)
    return _bits(parent) - sum(left) / n * _bits(left) - sum(right) / n * _bits(right)


def brute_force_split(X, y, k):
    """Every midpoint of every feature, scored with the plain entropy formulas."""
    parent = np.bincount(y, minlength=k)
    best = (-1, 0.0, -np.inf)
    for f in range(X.shape[1]):
        u = np.unique(X[:, f])
        for a, b in zip(u[:-1], u[1:]):
            thr = 0.5 * (a + b)
            m = X[:, f] <= thr
            g = _gain(parent.tolist(), np.bincount(y[m], minlength=k).tolist(),
                      np.bincount(y[~m], minlength=k).tolist())
            if g > best[2] + 1e-12:
                best = (f, thr, g)
    return best
