"""PCA fit/projection for feature dimensionality reduction.

Covariance uses the unbiased divisor (n - 1).  Eigenvectors carry a
deterministic sign convention (largest-magnitude entry positive, ties by
lowest index) so fitted models serialize reproducibly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

DEFAULT_COMPONENTS = 69


@dataclass
class PcaModel:
    mean: np.ndarray         # (n_features,)
    components: np.ndarray   # (k, n_features), rows orthonormal, eigenvalue-descending
    eigenvalues: np.ndarray  # full spectrum, length n_features, non-increasing
    k: int
    degenerate: bool = False

    @property
    def input_dim(self) -> int:
        return len(self.mean)


def _apply_sign_convention(components: np.ndarray) -> np.ndarray:
    out = components.copy()
    for row in out:
        pivot = np.argmax(np.abs(row))
        if row[pivot] < 0:
            row *= -1.0
    return out


def pca_fit(X: np.ndarray, k: int) -> PcaModel:
    """Fit PCA on rows of X, keeping the top-k eigenvectors of the sample
    covariance matrix."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or len(X) < 2:
        raise ValueError("pca_fit needs a 2-D array with at least 2 samples")
    n, dim = X.shape
    if not 1 <= k <= min(dim, n - 1):
        raise ValueError(f"k must be in [1, min(n_features={dim}, n_samples-1={n - 1})], got {k}")
    mean = X.mean(axis=0)
    centered = X - mean
    cov = centered.T @ centered / (n - 1)
    eigvals, eigvecs = np.linalg.eigh(cov)
    order = np.argsort(eigvals, kind="stable")[::-1]
    eigvals = np.maximum(eigvals[order], 0.0)
    components = _apply_sign_convention(eigvecs[:, order].T)
    degenerate = eigvals.sum() <= 1e-12
    return PcaModel(mean, components[:k], eigvals, k, degenerate)


def pca_project(model: PcaModel, f: np.ndarray) -> np.ndarray:
    """Project feature vectors onto the fitted basis: f_hat = C (f - mean).
    Accepts a single (n_features,) vector or an (n, n_features) batch."""
    f = np.asarray(f, dtype=float)
    if f.shape[-1] != model.input_dim:
        raise ValueError(f"feature dimension {f.shape[-1]} != model dimension {model.input_dim}")
    return (f - model.mean) @ model.components.T


def pca_reconstruct(model: PcaModel, projected: np.ndarray) -> np.ndarray:
    projected = np.asarray(projected, dtype=float)
    if projected.shape[-1] != model.k:
        raise ValueError(f"projected dimension {projected.shape[-1]} != k={model.k}")
    return projected @ model.components + model.mean


def variance_ratio(model: PcaModel, k_prime: int) -> float:
    """Fraction of total variance captured by the top k_prime components."""
    if not 1 <= k_prime <= len(model.eigenvalues):
        raise ValueError(f"k_prime must be in [1, {len(model.eigenvalues)}], got {k_prime}")
    total = model.eigenvalues.sum()
    if total <= 0:
        return 1.0  # zero-variance data: vacuously complete
    return float(model.eigenvalues[:k_prime].sum() / total)
