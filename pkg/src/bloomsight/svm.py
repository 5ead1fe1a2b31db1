"""Soft-margin RBF-SVM trained by sequential minimal optimization.

The solver minimizes the standard dual

    1/2 a' Q a - e' a,   Q_ij = y_i y_j K(x_i, x_j),
    subject to  y' a = 0,  0 <= a_i <= C,

using maximal-violating-pair working set selection.  With K precomputed the
per-iteration cost is O(n); ties in the argmax/argmin go to the lowest
index, so training is fully deterministic.  The `seed` parameter is part of
the training contract but unused: maximal-violation selection leaves no
random choices to make.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEFAULT_TOL = 1e-3

GRID_C_DEFAULT = (1.0, 3.0, 10.0, 30.0, 100.0, 180.0, 300.0)
GRID_GAMMA_DEFAULT = (1e-5, 1e-4, 1e-3, 1e-2, 1e-1, 1.0, 10.0)


@dataclass
class SvmModel:
    support_vectors: np.ndarray  # (n_sv, dim)
    dual_coef: np.ndarray        # (n_sv,) alpha_i * y_i
    bias: float
    gamma: float
    cost: float
    kernel: str = "rbf"
    converged: bool = True
    kkt_gap: float = 0.0
    iterations: int = 0

    @property
    def dim(self) -> int:
        return self.support_vectors.shape[1]


def squared_distances(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Pairwise squared Euclidean distances between rows of A and rows of B."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    d = (A**2).sum(axis=1)[:, None] + (B**2).sum(axis=1)[None, :] - 2.0 * (A @ B.T)
    return np.maximum(d, 0.0)


def rbf_kernel(A: np.ndarray, B: np.ndarray, gamma: float) -> np.ndarray:
    return np.exp(-gamma * squared_distances(A, B))


def smo_solve(K: np.ndarray, y: np.ndarray, C: float, tol: float = DEFAULT_TOL,
              max_iter: int | None = None):
    """Run SMO on a precomputed kernel matrix.

    Returns (alpha, bias, iterations, gap, converged).
    """
    y = np.asarray(y, dtype=float)
    n = len(y)
    if max_iter is None:
        max_iter = max(10_000, 200 * n)

    alpha = np.zeros(n)
    grad = -np.ones(n)  # gradient of the dual objective at alpha = 0
    pos = y > 0
    tau = 1e-12

    it = 0
    gap = np.inf
    while it < max_iter:
        # b-candidates: -y_t * grad_t; optimal iff max over I_up <= min over I_low
        cand = -y * grad
        in_up = np.where(pos, alpha < C, alpha > 0)
        in_low = np.where(pos, alpha > 0, alpha < C)
        up_vals = np.where(in_up, cand, -np.inf)
        low_vals = np.where(in_low, cand, np.inf)
        i = int(np.argmax(up_vals))
        j = int(np.argmin(low_vals))
        gap = up_vals[i] - low_vals[j]
        if gap <= tol:
            break

        old_ai, old_aj = alpha[i], alpha[j]
        if y[i] != y[j]:
            quad = max(K[i, i] + K[j, j] + 2.0 * K[i, j], tau)
            delta = (-grad[i] - grad[j]) / quad
            diff = old_ai - old_aj
            ai, aj = old_ai + delta, old_aj + delta
            if diff > 0:
                if aj < 0:
                    ai, aj = diff, 0.0
                if ai > C:
                    ai, aj = C, C - diff
            else:
                if ai < 0:
                    ai, aj = 0.0, -diff
                if aj > C:
                    ai, aj = C + diff, C
        else:
            quad = max(K[i, i] + K[j, j] - 2.0 * K[i, j], tau)
            delta = (grad[i] - grad[j]) / quad
            total = old_ai + old_aj
            ai, aj = old_ai - delta, old_aj + delta
            if total > C:
                if ai > C:
                    ai, aj = C, total - C
                elif aj > C:
                    ai, aj = total - C, C
            else:
                if aj < 0:
                    ai, aj = total, 0.0
                elif ai < 0:
                    ai, aj = 0.0, total
        alpha[i], alpha[j] = ai, aj
        d_ai, d_aj = ai - old_ai, aj - old_aj
        grad += (y * y[i] * d_ai) * K[:, i] + (y * y[j] * d_aj) * K[:, j]
        it += 1

    converged = gap <= tol
    cand = -y * grad
    eps = 1e-8 * C
    free = (alpha > eps) & (alpha < C - eps)
    if free.any():
        bias = float(cand[free].mean())
    else:
        in_up = np.where(pos, alpha < C, alpha > 0)
        in_low = np.where(pos, alpha > 0, alpha < C)
        hi = np.where(in_up, cand, -np.inf).max()
        lo = np.where(in_low, cand, np.inf).min()
        bias = float((hi + lo) / 2.0)
    return alpha, bias, it, float(max(gap, 0.0)), converged


def svm_train(X: np.ndarray, y: np.ndarray, C: float, gamma: float,
              tol: float = DEFAULT_TOL, max_iter: int | None = None,
              seed: int = 0) -> SvmModel:
    """Train an RBF-SVM.  y must contain both classes as +1/-1."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or len(X) != len(y):
        raise ValueError("X must be (n, dim) with matching labels")
    if not (np.any(y > 0) and np.any(y < 0)):
        raise ValueError("training data must contain both classes")
    if C <= 0 or gamma <= 0:
        raise ValueError("C and gamma must be positive")
    K = rbf_kernel(X, X, gamma)
    alpha, bias, iterations, gap, converged = smo_solve(K, y, C, tol, max_iter)
    sv = alpha > 1e-12
    return SvmModel(
        support_vectors=X[sv].copy(),
        dual_coef=(alpha * y)[sv],
        bias=bias,
        gamma=gamma,
        cost=C,
        converged=converged,
        kkt_gap=gap,
        iterations=iterations,
    )


def svm_decision(model: SvmModel, f: np.ndarray):
    """Raw margin f(x) = sum_i dual_coef_i K(sv_i, x) + b.  The predicted
    label is sign(score); the score is the PR-sweep variable."""
    f = np.asarray(f, dtype=float)
    single = f.ndim == 1
    if f.shape[-1] != model.dim:
        raise ValueError(f"feature dimension {f.shape[-1]} != model dimension {model.dim}")
    scores = rbf_kernel(np.atleast_2d(f), model.support_vectors, model.gamma) @ model.dual_coef
    scores = scores + model.bias
    return float(scores[0]) if single else scores


def dual_objective(K: np.ndarray, y: np.ndarray, alpha: np.ndarray) -> float:
    """Value of 1/2 a'Qa - e'a for diagnostics and testing."""
    ay = alpha * y
    return float(0.5 * ay @ K @ ay - alpha.sum())
