"""Principal component analysis through the covariance eigendecomposition."""
import csv
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .numeric import as_matrix, covariance, mean_center, symmetric_eigen


@dataclass(frozen=True)
class PcaModel:
    means: np.ndarray  # (d,)
    components: np.ndarray  # (d, k), orthonormal columns
    eigenvalues: np.ndarray  # (k,) retained, descending
    all_eigenvalues: np.ndarray  # (d,)
    variance_shares: np.ndarray  # cumulative share for 1..d components
    scales: np.ndarray  # (d,) ones unless fitted with unit-variance scaling

    @property
    def k(self):
        return self.components.shape[1]

    @property
    def d(self):
        return self.means.shape[0]


def pca_fit(data, variance_target=0.95, n_components=None, scale=False):
    """Fit on ``data`` keeping the fewest components reaching ``variance_target``.

    ``n_components`` forces ``k`` instead. ``scale`` divides each column by
    its standard deviation before the decomposition.
    """
    x = as_matrix(data, "data")
    m, d = x.shape
    if m < 2:
        raise DomainError("PCA needs at least two rows")
    if not 0.0 < variance_target <= 1.0:
        raise DomainError(f"variance_target must lie in (0, 1], got {variance_target}")
    centered, means = mean_center(x)
    scales = np.ones(d)
    if scale:
        sd = centered.std(axis=0)
        scales = np.where(sd > 0, sd, 1.0)
        centered = centered / scales
    eig = symmetric_eigen(covariance(centered))
    values = np.clip(eig.values, 0.0, None)
    total = values.sum()
    if total <= 0:
        raise DomainError("data has zero total variance")
    shares = np.cumsum(values) / total
    if n_components is not None:
        if not 1 <= n_components <= d:
            raise DomainError(f"n_components must lie in 1..{d}")
        k = int(n_components)
    else:
        # rounding slack so e.g. a target of 1.0 is reachable
        k = int(np.argmax(shares >= variance_target - 1e-12)) + 1
    return PcaModel(
        means=means,
        components=eig.vectors[:, :k].copy(),
        eigenvalues=values[:k].copy(),
        all_eigenvalues=values,
        variance_shares=shares,
        scales=scales,
    )


def _check(model, data):
    x = as_matrix(data, "data")
    if x.shape[1] != model.d:
        raise DomainError(f"expected {model.d} columns, got {x.shape[1]}")
    return (x - model.means) / model.scales


def pca_transform(model, data):
    """Project rows onto the retained components: ``(x - mean) @ U_k``."""
    return _check(model, data) @ model.components


def pca_inverse(model, scores):
    """Map component scores back to (unscaled) feature space."""
    return (np.asarray(scores) @ model.components.T) * model.scales + model.means


def pca_reconstruction_error(model, data):
    """Squared Frobenius distance between centered data and its projection."""
    c = _check(model, data)
    proj = c @ model.components @ model.components.T
    return float(np.sum((proj - c) ** 2))


def write_variance_curve(model, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["component", "eigenvalue", "cumulative_share", "retained"])
        for i, (lam, s) in enumerate(zip(model.all_eigenvalues, model.variance_shares), start=1):
            w.writerow([i, repr(float(lam)), repr(float(s)), int(i <= model.k)])


def write_component_scatter(scores, path, pairs=((0, 1), (0, 2), (1, 2), (1, 3)), labels=None):
    """Long-format scatter data for pairs of component scores."""
    scores = np.asarray(scores)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["pair", "row", "x", "y", "label"])
        for a, b in pairs:
            if max(a, b) >= scores.shape[1]:
                continue
            for r in range(scores.shape[0]):
                lab = "" if labels is None else int(labels[r])
                w.writerow([f"PC{a + 1}-PC{b + 1}", r, repr(float(scores[r, a])), repr(float(scores[r, b])), lab])
