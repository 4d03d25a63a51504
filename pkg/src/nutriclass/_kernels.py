"""Inner loops of tree induction, tree routing and the SMO solver.

Each public kernel exists twice: a numba ``@njit`` version and a numpy
version. ``_backend.USE_NUMBA`` decides which one the module exports.
"""
from collections import OrderedDict

import numpy as np

from ._backend import USE_NUMBA

GAIN_TIE_EPS = 1e-12
SMO_TAU = 1e-12


def xlog2x_table(n):
    """``t[c] = c * log2(c)`` for ``c = 0..n`` (``t[0] = 0``)."""
    c = np.arange(n + 1, dtype=np.float64)
    t = np.zeros(n + 1)
    t[1:] = c[1:] * np.log2(c[1:])
    return t


# --------------------------------------------------------------------------
# split search (numpy)

def _best_split_numpy(X, y, idx, features, n_classes, table):
    m = idx.shape[0]
    parent = np.bincount(y[idx], minlength=n_classes)
    parent_nh = table[m] - table[parent].sum()
    best_gain = -np.inf
    cands = []
    for f in features:
        vals = X[idx, f]
        order = np.argsort(vals, kind="mergesort")
        sv = vals[order]
        valid = np.nonzero(sv[:-1] < sv[1:])[0]
        if valid.size == 0:
            continue
        onehot = np.zeros((m, n_classes), dtype=np.int64)
        onehot[np.arange(m), y[idx][order]] = 1
        left = np.cumsum(onehot, axis=0)[valid]
        right = parent - left
        nl = valid + 1
        nr = m - nl
        child_nh = (table[nl] - table[left].sum(axis=1)) + (table[nr] - table[right].sum(axis=1))
        gains = (parent_nh - child_nh) / m
        thr = 0.5 * (sv[valid] + sv[valid + 1])
        thr = np.where(thr >= sv[valid + 1], sv[valid], thr)
        cands.append((f, gains, thr))
        best_gain = max(best_gain, float(gains.max()))
    for f, gains, thr in cands:
        hit = np.nonzero(gains >= best_gain - GAIN_TIE_EPS)[0]
        if hit.size:
            k = hit[0]
            return int(f), float(thr[k]), float(gains[k])
    return -1, 0.0, 0.0


def _predict_tree_numpy(X, feature, threshold, left, right, value):
    node = np.zeros(X.shape[0], dtype=np.int64)
    active = feature[node] >= 0
    while active.any():
        rows = np.nonzero(active)[0]
        nd = node[rows]
        go_left = X[rows, feature[nd]] <= threshold[nd]
        node[rows] = np.where(go_left, left[nd], right[nd])
        active = feature[node] >= 0
    return value[node]


# --------------------------------------------------------------------------
# SMO (numpy)

class _RowCache:
    def __init__(self, X, sq, gamma, max_rows):
        self.X, self.sq, self.gamma = X, sq, gamma
        self.max_rows = max(2, max_rows)
        self.rows = OrderedDict()

    def get(self, i):
        row = self.rows.get(i)
        if row is not None:
            self.rows.move_to_end(i)
            return row
        d2 = self.sq + self.sq[i] - 2.0 * (self.X @ self.X[i])
        row = np.exp(-self.gamma * np.maximum(d2, 0.0))
        row[i] = 1.0
        self.rows[i] = row
        if len(self.rows) > self.max_rows:
            self.rows.popitem(last=False)
        return row


def _smo_numpy(X, y, c, gamma, tol, max_iter, cache_rows):
    n = y.shape[0]
    sq = np.einsum("ij,ij->i", X, X)
    cache = _RowCache(X, sq, gamma, cache_rows)
    alpha = np.zeros(n)
    grad = -np.ones(n)
    pos = y > 0
    n_iter = 0
    converged = False
    while n_iter < max_iter:
        up = np.where(pos, alpha < c, alpha > 0)
        low = np.where(pos, alpha > 0, alpha < c)
        score = np.where(up, -y * grad, -np.inf)
        i = int(np.argmax(score))
        gmax = score[i]
        yg = np.where(low, y * grad, -np.inf)
        gmax2 = yg.max()
        if gmax + gmax2 < tol:
            converged = True
            break
        ki = cache.get(i)
        b = gmax + y * grad
        a = np.maximum(2.0 - 2.0 * ki, SMO_TAU)
        obj = np.where(low & (b > 0), -(b * b) / a, np.inf)
        j = int(np.argmin(obj))
        if not np.isfinite(obj[j]):
            converged = True
            break
        kj = cache.get(j)
        ai, aj = _pair_update(alpha[i], alpha[j], grad[i], grad[j], y[i], y[j], ki[j], c)
        dai, daj = ai - alpha[i], aj - alpha[j]
        alpha[i], alpha[j] = ai, aj
        grad += y * (y[i] * dai * ki + y[j] * daj * kj)
        n_iter += 1
    rho = _rho(alpha, grad, y, c)
    return alpha, rho, n_iter, converged


# --------------------------------------------------------------------------
# shared scalar helpers (plain python; jitted copies below)

def _pair_update(ai, aj, gi, gj, yi, yj, kij, c):
    """Analytic two-variable step with box clipping (LIBSVM form)."""
    if yi != yj:
        quad = max(2.0 - 2.0 * kij, SMO_TAU)
        delta = (-gi - gj) / quad
        diff = ai - aj
        ai += delta
        aj += delta
        if diff > 0:
            if aj < 0:
                aj = 0.0
                ai = diff
        else:
            if ai < 0:
                ai = 0.0
                aj = -diff
        if diff > 0:
            if ai > c:
                ai = c
                aj = c - diff
        else:
            if aj > c:
                aj = c
                ai = c + diff
    else:
        quad = max(2.0 - 2.0 * kij, SMO_TAU)
        delta = (gi - gj) / quad
        total = ai + aj
        ai -= delta
        aj += delta
        if total > c:
            if ai > c:
                ai = c
                aj = total - c
        else:
            if aj < 0:
                aj = 0.0
                ai = total
        if total > c:
            if aj > c:
                aj = c
                ai = total - c
        else:
            if ai < 0:
                ai = 0.0
                aj = total
    return ai, aj


def _rho(alpha, grad, y, c):
    ub, lb = np.inf, -np.inf
    total, n_free = 0.0, 0
    for t in range(y.shape[0]):
        yg = y[t] * grad[t]
        if alpha[t] >= c:
            if y[t] < 0:
                ub = min(ub, yg)
            else:
                lb = max(lb, yg)
        elif alpha[t] <= 0:
            if y[t] > 0:
                ub = min(ub, yg)
            else:
                lb = max(lb, yg)
        else:
            total += yg
            n_free += 1
    if n_free > 0:
        return total / n_free
    return 0.5 * (ub + lb)


# --------------------------------------------------------------------------
# numba versions

if USE_NUMBA:
    from numba import njit

    _pair_update_jit = njit(cache=True)(_pair_update)
    _rho_jit = njit(cache=True)(_rho)

    @njit(cache=True)
    def _best_split_numba(X, y, idx, features, n_classes, table):
        m = idx.shape[0]
        nf = features.shape[0]
        parent = np.zeros(n_classes, dtype=np.int64)
        for s in range(m):
            parent[y[idx[s]]] += 1
        parent_nh = table[m]
        for k in range(n_classes):
            parent_nh -= table[parent[k]]
        gains = np.full((nf, m), -np.inf)
        thrs = np.zeros((nf, m))
        vals = np.empty(m)
        ys = np.empty(m, dtype=np.int64)
        left = np.zeros(n_classes, dtype=np.int64)
        best_gain = -np.inf
        for fi in range(nf):
            f = features[fi]
            for s in range(m):
                vals[s] = X[idx[s], f]
            order = np.argsort(vals, kind="mergesort")
            sv = vals[order]
            for s in range(m):
                ys[s] = y[idx[order[s]]]
            left[:] = 0
            for s in range(m - 1):
                left[ys[s]] += 1
                if sv[s] < sv[s + 1]:
                    nl = s + 1
                    nr = m - nl
                    child_nh = table[nl] + table[nr]
                    for k in range(n_classes):
                        child_nh -= table[left[k]] + table[parent[k] - left[k]]
                    g = (parent_nh - child_nh) / m
                    gains[fi, s] = g
                    t = 0.5 * (sv[s] + sv[s + 1])
                    if t >= sv[s + 1]:
                        t = sv[s]
                    thrs[fi, s] = t
                    if g > best_gain:
                        best_gain = g
        if best_gain == -np.inf:
            return -1, 0.0, 0.0
        for fi in range(nf):
            for s in range(m - 1):
                if gains[fi, s] >= best_gain - GAIN_TIE_EPS:
                    return features[fi], thrs[fi, s], gains[fi, s]
        return -1, 0.0, 0.0

    @njit(cache=True)
    def _predict_tree_numba(X, feature, threshold, left, right, value):
        n = X.shape[0]
        out = np.empty(n, dtype=value.dtype)
        for r in range(n):
            node = 0
            while feature[node] >= 0:
                if X[r, feature[node]] <= threshold[node]:
                    node = left[node]
                else:
                    node = right[node]
            out[r] = value[node]
        return out

    @njit(cache=True)
    def _kernel_row(X, sq, gamma, i, out):
        n, d = X.shape
        for t in range(n):
            dot = 0.0
            for q in range(d):
                dot += X[t, q] * X[i, q]
            d2 = sq[t] + sq[i] - 2.0 * dot
            if d2 < 0.0:
                d2 = 0.0
            out[t] = np.exp(-gamma * d2)
        out[i] = 1.0

    @njit(cache=True)
    def _smo_numba_core(X, y, c, gamma, tol, max_iter, cache_rows):
        n = y.shape[0]
        sq = np.empty(n)
        for t in range(n):
            s = 0.0
            for q in range(X.shape[1]):
                s += X[t, q] * X[t, q]
            sq[t] = s
        n_slots = max(2, min(cache_rows, n))
        cache = np.empty((n_slots, n))
        slot_of = np.full(n, -1, dtype=np.int64)
        owner = np.full(n_slots, -1, dtype=np.int64)
        stamp = np.zeros(n_slots, dtype=np.int64)
        clock = 0
        alpha = np.zeros(n)
        grad = -np.ones(n)
        n_iter = 0
        converged = False
        si = 0
        sj = 0
        while n_iter < max_iter:
            gmax = -np.inf
            i = -1
            for t in range(n):
                up = alpha[t] < c if y[t] > 0 else alpha[t] > 0
                if up:
                    v = -y[t] * grad[t]
                    if v > gmax:
                        gmax = v
                        i = t
            gmax2 = -np.inf
            for t in range(n):
                low = alpha[t] > 0 if y[t] > 0 else alpha[t] < c
                if low:
                    v = y[t] * grad[t]
                    if v > gmax2:
                        gmax2 = v
            if i < 0 or gmax + gmax2 < tol:
                converged = True
                break
            # fetch row i (LRU)
            clock += 1
            si = slot_of[i]
            if si < 0:
                si = 0
                for s in range(n_slots):
                    if stamp[s] < stamp[si]:
                        si = s
                if owner[si] >= 0:
                    slot_of[owner[si]] = -1
                owner[si] = i
                slot_of[i] = si
                _kernel_row(X, sq, gamma, i, cache[si])
            stamp[si] = clock
            j = -1
            best = np.inf
            for t in range(n):
                low = alpha[t] > 0 if y[t] > 0 else alpha[t] < c
                if low:
                    b = gmax + y[t] * grad[t]
                    if b > 0:
                        a = 2.0 - 2.0 * cache[si, t]
                        if a <= 0:
                            a = SMO_TAU
                        v = -(b * b) / a
                        if v < best:
                            best = v
                            j = t
            if j < 0:
                converged = True
                break
            clock += 1
            sj = slot_of[j]
            if sj < 0:
                sj = 0
                for s in range(n_slots):
                    if s != si and (sj == si or stamp[s] < stamp[sj]):
                        sj = s
                if owner[sj] >= 0:
                    slot_of[owner[sj]] = -1
                owner[sj] = j
                slot_of[j] = sj
                _kernel_row(X, sq, gamma, j, cache[sj])
            stamp[sj] = clock
            ai, aj = _pair_update_jit(alpha[i], alpha[j], grad[i], grad[j], y[i], y[j], cache[si, j], c)
            dai = (ai - alpha[i]) * y[i]
            daj = (aj - alpha[j]) * y[j]
            alpha[i] = ai
            alpha[j] = aj
            for t in range(n):
                grad[t] += y[t] * (dai * cache[si, t] + daj * cache[sj, t])
            n_iter += 1
        rho = _rho_jit(alpha, grad, y, c)
        return alpha, rho, n_iter, converged

    def _smo_numba(X, y, c, gamma, tol, max_iter, cache_rows):
        return _smo_numba_core(np.ascontiguousarray(X), np.ascontiguousarray(y, dtype=np.float64),
                               float(c), float(gamma), float(tol), int(max_iter), int(cache_rows))

    best_split = _best_split_numba
    predict_tree_rows = _predict_tree_numba
    smo_solve = _smo_numba
else:
    best_split = _best_split_numpy
    predict_tree_rows = _predict_tree_numpy
    smo_solve = _smo_numpy
