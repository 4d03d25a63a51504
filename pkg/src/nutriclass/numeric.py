"""Dense linear algebra and reproducible randomness used by every model.

Matrices are plain 2-D ``float64`` numpy arrays. The random generator is a
counter-based SplitMix64 stream so that draws depend only on (seed, position)
and never on numpy's version or the host platform.
"""
import hashlib
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, NumericError

__all__ = [
    "EigenDecomposition",
    "Rng",
    "as_matrix",
    "covariance",
    "derive_seed",
    "mean_center",
    "symmetric_eigen",
]

_MASK64 = (1 << 64) - 1


def as_matrix(x, name="matrix"):
    """Coerce to a finite 2-D float64 array."""
    a = np.asarray(x, dtype=np.float64)
    if a.ndim == 1:
        a = a.reshape(-1, 1)
    if a.ndim != 2:
        raise DomainError(f"{name} must be 2-D, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise DomainError(f"{name} contains non-finite entries")
    return a


def mean_center(x):
    """Subtract column means.

    Returns ``(centered, means)``.
    """
    a = as_matrix(x)
    if a.shape[0] == 0 or a.shape[1] == 0:
        raise DomainError("cannot center an empty matrix")
    means = a.mean(axis=0)
    return a - means, means


def covariance(centered, tol=1e-9):
    """Population covariance ``X^T X / m`` of an already-centered matrix."""
    a = as_matrix(centered)
    m = a.shape[0]
    if m == 0:
        raise DomainError("cannot take covariance of an empty matrix")
    col_sums = a.sum(axis=0)
    scale = max(1.0, float(np.abs(a).max()))
    if np.any(np.abs(col_sums) > tol * m * scale):
        raise DomainError("covariance input is not mean-centered")
    c = a.T @ a / m
    return (c + c.T) / 2.0


@dataclass(frozen=True)
class EigenDecomposition:
    values: np.ndarray  # descending
    vectors: np.ndarray  # column i pairs with values[i]


def symmetric_eigen(a, tol=1e-9, max_sweeps=100):
    """Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.

    Eigenvalues come back sorted descending; each eigenvector is signed so its
    largest-magnitude entry is non-negative.
    """
    a = as_matrix(a)
    d = a.shape[0]
    if a.shape[1] != d:
        raise DomainError(f"expected a square matrix, got {a.shape}")
    scale = max(1.0, float(np.abs(a).max()))
    if np.abs(a - a.T).max() > tol * scale:
        raise DomainError("matrix is not symmetric")

    w = (a + a.T) / 2.0
    v = np.eye(d)
    off_target = (1e-15 * max(float(np.linalg.norm(w)), 1e-300)) ** 2
    for _ in range(max_sweeps):
        off = float(np.sum(np.triu(w, 1) ** 2))
        if off <= off_target:
            break
        for p in range(d - 1):
            for q in range(p + 1, d):
                apq = w[p, q]
                if apq == 0.0:
                    continue
                theta = (w[q, q] - w[p, p]) / (2.0 * apq)
                if theta == 0.0:
                    t = 1.0
                elif abs(theta) > 1e150:
                    t = 0.5 / theta  # theta**2 would overflow
                else:
                    t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                wp = w[:, p].copy()
                wq = w[:, q].copy()
                w[:, p] = c * wp - s * wq
                w[:, q] = s * wp + c * wq
                wp = w[p, :].copy()
                wq = w[q, :].copy()
                w[p, :] = c * wp - s * wq
                w[q, :] = s * wp + c * wq
                w[p, q] = w[q, p] = 0.0
                vp = v[:, p].copy()
                vq = v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
    else:
        raise NumericError(f"Jacobi eigensolver did not converge in {max_sweeps} sweeps")

    values = np.diag(w).copy()
    order = np.argsort(-values, kind="stable")
    values = values[order]
    vectors = v[:, order]
    for i in range(d):
        col = vectors[:, i]
        if col[np.argmax(np.abs(col))] < 0:
            vectors[:, i] = -col
    return EigenDecomposition(values=values, vectors=vectors)


# --------------------------------------------------------------------------
# random numbers

_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)


def _splitmix(z):
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def derive_seed(seed, label):
    """Child seed for a named sub-stream; stable across runs and platforms."""
    digest = hashlib.sha256(f"{int(seed) & _MASK64}/{label}".encode()).digest()
    return int.from_bytes(digest[:8], "little")


class Rng:
    """Counter-based SplitMix64 generator.

    Output ``i`` (1-based) is ``mix(seed + i * golden_gamma)``, so any block
    of draws can be produced in one vectorised call.
    """

    def __init__(self, seed):
        self.seed = int(seed) & _MASK64
        self.counter = 0

    def __repr__(self):
        return f"Rng(seed={self.seed}, counter={self.counter})"

    def fork(self, label):
        return Rng(derive_seed(self.seed, label))

    def next_u64(self, size):
        idx = np.arange(self.counter + 1, self.counter + 1 + size, dtype=np.uint64)
        self.counter += size
        with np.errstate(over="ignore"):
            z = np.uint64(self.seed) + idx * _GAMMA
            return _splitmix(z)

    def uniform(self, size=None):
        """Doubles in ``[0, 1)`` with 53 random bits."""
        n = 1 if size is None else int(np.prod(size))
        u = (self.next_u64(n) >> np.uint64(11)).astype(np.float64) * (2.0**-53)
        if size is None:
            return float(u[0])
        return u.reshape(size)

    def normal(self, size):
        """Standard normal draws by the Box-Muller transform."""
        n = int(np.prod(size))
        half = (n + 1) // 2
        u = self.uniform(2 * half)
        u1 = 1.0 - u[:half]  # (0, 1]
        u2 = u[half:]
        r = np.sqrt(-2.0 * np.log(u1))
        z = np.concatenate([r * np.cos(2.0 * np.pi * u2), r * np.sin(2.0 * np.pi * u2)])
        return z[:n].reshape(size)

    def shuffle(self, n):
        """Uniform random permutation of ``0..n-1``."""
        if n < 1:
            raise DomainError("shuffle needs n >= 1")
        keys = self.next_u64(n)
        return np.argsort(keys, kind="stable").astype(np.int64)

    def sample_with_replacement(self, n, m):
        """``m`` indices drawn uniformly from ``0..n-1``."""
        if n < 1:
            raise DomainError("sampling needs n >= 1")
        idx = np.floor(self.uniform(m) * n).astype(np.int64)
        return np.minimum(idx, n - 1)

    def choice(self, n, k):
        """``k`` distinct indices from ``0..n-1`` (order random)."""
        if not 0 <= k <= n:
            raise DomainError(f"cannot choose {k} of {n}")
        return self.shuffle(n)[:k]
