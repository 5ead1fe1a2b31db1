"""Independent reference implementations used to verify the library.

These are intentionally written with different algorithms from the
production code: a cyclic Jacobi eigensolver, a projected-gradient QP
solver, exhaustive searches, and direct O(n^2) recounts.
"""

import numpy as np


def jacobi_eigh(A, tol=1e-14, max_sweeps=100):
    """Cyclic Jacobi eigendecomposition of a symmetric matrix.
    Returns (eigenvalues, eigenvectors) sorted descending."""
    A = np.array(A, dtype=float)
    n = A.shape[0]
    V = np.eye(n)
    for _ in range(max_sweeps):
        off = np.sqrt(np.sum(np.tril(A, -1) ** 2))
        if off < tol:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                if abs(A[p, q]) < 1e-300:
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * A[p, q])
                t = np.sign(theta) / (abs(theta) + np.sqrt(theta**2 + 1.0)) if theta != 0 else 1.0
                c = 1.0 / np.sqrt(t**2 + 1.0)
                s = t * c
                J = np.eye(n)
                J[p, p] = J[q, q] = c
                J[p, q] = s
                J[q, p] = -s
                A = J.T @ A @ J
                V = V @ J
    eigvals = np.diag(A).copy()
    order = np.argsort(-eigvals, kind="stable")
    return eigvals[order], V[:, order]


def project_box_hyperplane(v, y, C, iters=80):
    """Projection of v onto {0 <= a <= C, y.a = 0} by bisection on the
    hyperplane multiplier."""
    v = np.asarray(v, dtype=float)
    y = np.asarray(y, dtype=float)

    def g(lmbda):
        return y @ np.clip(v - lmbda * y, 0.0, C)

    span = np.abs(v).max() + C + 1.0
    lo, hi = -span, span
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if g(mid) > 0:
            lo = mid
        else:
            hi = mid
    return np.clip(v - 0.5 * (lo + hi) * y, 0.0, C)


def qp_svm_dual(K, y, C, max_iter=50_000, tol=1e-12):
    """Accelerated projected-gradient solver (with adaptive restart) for the
    SVM dual  min 1/2 a'Qa - e'a  s.t.  y'a = 0, 0 <= a <= C."""
    K = np.asarray(K, dtype=float)
    y = np.asarray(y, dtype=float)
    n = len(y)
    Q = (y[:, None] * y[None, :]) * K
    lipschitz = max(np.linalg.eigvalsh(Q).max(), 1e-12)
    step = 1.0 / lipschitz
    a = np.zeros(n)
    z = a.copy()
    t = 1.0
    for _ in range(max_iter):
        a_new = project_box_hyperplane(z - step * (Q @ z - 1.0), y, C)
        if (z - a_new) @ (a_new - a) > 0:  # momentum points uphill: restart
            z, t = a_new.copy(), 1.0
        else:
            t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
            z = a_new + ((t - 1.0) / t_new) * (a_new - a)
            t = t_new
        if np.abs(a_new - a).max() < tol:
            a = a_new
            break
        a = a_new
    objective = 0.5 * a @ Q @ a - a.sum()
    return a, objective


def brute_otsu(counts):
    """Exhaustive inter-class variance search; classes are levels < t and
    levels >= t, ties to the lowest t."""
    counts = np.asarray(counts, dtype=float)
    best_t, best_var = None, -1.0
    for t in range(1, len(counts)):
        w0 = counts[:t].sum()
        w1 = counts[t:].sum()
        if w0 == 0 or w1 == 0:
            continue
        m0 = (counts[:t] * np.arange(t)).sum() / w0
        m1 = (counts[t:] * np.arange(t, len(counts))).sum() / w1
        var = w0 * w1 * (m0 - m1) ** 2
        if var > best_var:
            best_var, best_t = var, t
    return best_t


def recount_pr(scores, labels):
    """O(n^2) recount of PR points at every distinct threshold, descending."""
    scores = np.asarray(scores, dtype=float)
    pos = np.asarray(labels) > 0
    points = []
    for t in sorted(set(scores.tolist()), reverse=True):
        pred = scores >= t
        tp = int(np.sum(pred & pos))
        fp = int(np.sum(pred & ~pos))
        fn = int(np.sum(~pred & pos))
        points.append((t, tp, fp, fn, tp / pos.sum(), tp / (tp + fp)))
    return points


def gaussian_kernel_1d(sigma, truncate=4.0):
    """Sampled Gaussian kernel identical to scipy.ndimage's construction."""
    radius = int(truncate * sigma + 0.5)
    x = np.arange(-radius, radius + 1)
    k = np.exp(-0.5 * (x / sigma) ** 2)
    return k / k.sum()


def direct_gaussian_blur(img, sigma, truncate=4.0):
    """Direct 2-D convolution with replicate padding (one channel)."""
    k = gaussian_kernel_1d(sigma, truncate)
    r = len(k) // 2
    img = np.asarray(img, dtype=float)
    padded = np.pad(img, r, mode="edge")
    h, w = img.shape
    out_rows = np.zeros((h, w + 2 * r))
    for i in range(h):
        for j in range(w + 2 * r):
            out_rows[i, j] = padded[i : i + 2 * r + 1, j] @ k
    out = np.zeros((h, w))
    for i in range(h):
        for j in range(w):
            out[i, j] = out_rows[i, j : j + 2 * r + 1] @ k
    return out


def svm_dual_objective(K, y, alpha):
    ay = np.asarray(alpha) * np.asarray(y, dtype=float)
    return 0.5 * ay @ np.asarray(K) @ ay - np.asarray(alpha).sum()
