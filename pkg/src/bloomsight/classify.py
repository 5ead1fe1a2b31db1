"""Decision mechanisms beyond the SVM: Bhattacharyya-likelihood classifier,
pixel-level HSV threshold detector, and exhaustive hyperparameter grid
search with internal k-fold cross-validation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .imageops import filter_components_by_size
from .metrics import auc_pr, f1_optimal, kfold_split, pr_curve
from .svm import (GRID_C_DEFAULT, GRID_GAMMA_DEFAULT, DEFAULT_TOL,
                  rbf_kernel, smo_solve, squared_distances)

GRID_SIGMA_DEFAULT = (1.0, 2.0, 5.0, 10.0)
_NORM_ATOL = 1e-6


# ---------------------------------------------------------------------------
# Bhattacharyya likelihood


@dataclass
class BhModel:
    histograms: np.ndarray  # (m, bins), each row sums to 1
    sigma: float
    threshold: float = 0.5


def _check_normalized(arr: np.ndarray, name: str) -> None:
    sums = arr.sum(axis=-1)
    if np.any(np.abs(sums - 1.0) > _NORM_ATOL):
        raise ValueError(f"{name} must be L1-normalized histograms")


def bh_distance(p, q) -> float:
    """Hellinger-form Bhattacharyya distance sqrt(1 - sum_i sqrt(p_i q_i))."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise ValueError(f"histogram binning mismatch: {p.shape} vs {q.shape}")
    _check_normalized(p, "p")
    _check_normalized(q, "q")
    bc = np.sqrt(p * q).sum()
    return float(np.sqrt(max(1.0 - bc, 0.0)))


def bh_train(histograms: np.ndarray, labels, sigma: float, threshold: float = 0.5) -> BhModel:
    """Store the positive-class histograms for likelihood scoring."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    histograms = np.asarray(histograms, dtype=float)
    positives = histograms[np.asarray(labels) > 0]
    if len(positives) == 0:
        raise ValueError("no positive samples to build the likelihood model from")
    _check_normalized(positives, "positive histograms")
    return BhModel(positives.copy(), sigma, threshold)


def bh_likelihood(model: BhModel, h):
    """Average Gaussian-kernel similarity exp(-B^2 / (2 sigma^2)) against the
    stored positive histograms.  Accepts one histogram or an (n, bins) batch."""
    if len(model.histograms) == 0:
        raise ValueError("model holds no positive histograms")
    h = np.asarray(h, dtype=float)
    single = h.ndim == 1
    H = np.atleast_2d(h)
    if H.shape[1] != model.histograms.shape[1]:
        raise ValueError(f"histogram binning mismatch: {H.shape[1]} vs {model.histograms.shape[1]}")
    _check_normalized(H, "input histograms")
    # B^2 = 1 - BC, so the kernel needs no square root
    bc = np.sqrt(H) @ np.sqrt(model.histograms).T
    like = np.exp(-(1.0 - np.clip(bc, 0.0, 1.0)) / (2.0 * model.sigma**2)).mean(axis=1)
    return float(like[0]) if single else like


# ---------------------------------------------------------------------------
# pixel-level HSV thresholding


@dataclass(frozen=True)
class HsvThresholdConfig:
    """Inclusive 8-bit channel ranges plus component size bounds."""

    h_range: tuple = (0, 255)
    s_range: tuple = (0, 32)
    v_range: tuple = (139, 255)
    min_size: int = 1200
    max_size: int = 45000

    def __post_init__(self):
        for lo, hi in (self.h_range, self.s_range, self.v_range):
            if lo > hi:
                raise ValueError(f"interval low {lo} > high {hi}")
        if self.min_size > self.max_size:
            raise ValueError(f"min_size {self.min_size} > max_size {self.max_size}")


def hsv_threshold_detect(img: np.ndarray, cfg: HsvThresholdConfig,
                         connectivity: int = 8) -> np.ndarray:
    """Binarize an HSV image by inclusive per-channel ranges (channels
    rescaled to [0, 255]), then size-filter the connected components."""
    hsv = np.asarray(img, dtype=float)
    h8 = hsv[..., 0] / 360.0 * 255.0
    s8 = hsv[..., 1] * 255.0
    v8 = hsv[..., 2] * 255.0
    mask = (
        (h8 >= cfg.h_range[0]) & (h8 <= cfg.h_range[1])
        & (s8 >= cfg.s_range[0]) & (s8 <= cfg.s_range[1])
        & (v8 >= cfg.v_range[0]) & (v8 <= cfg.v_range[1])
    )
    return filter_components_by_size(mask, cfg.min_size, cfg.max_size, connectivity)


# ---------------------------------------------------------------------------
# grid search


@dataclass(frozen=True)
class GridSpec:
    c_values: tuple = GRID_C_DEFAULT
    gamma_values: tuple = GRID_GAMMA_DEFAULT
    sigma_values: tuple = GRID_SIGMA_DEFAULT

    def __post_init__(self):
        for name, vals in (("c_values", self.c_values),
                           ("gamma_values", self.gamma_values),
                           ("sigma_values", self.sigma_values)):
            if len(vals) == 0 or any(v <= 0 for v in vals):
                raise ValueError(f"{name} must be a non-empty list of positive reals")


@dataclass
class GridCell:
    params: dict
    fold: object  # fold index, or "pooled"
    metric: str
    value: float
    flagged: bool = False


@dataclass
class GridSearchResult:
    best_params: dict
    best_score: float
    metric: str
    table: list = field(default_factory=list)


def _score_pooled(scores, labels, metric):
    curve = pr_curve(scores, labels)
    return auc_pr(curve) if metric == "aucpr" else f1_optimal(curve)[0]


def grid_search(X, y, grid: GridSpec, folds: int = 5, metric: str = "f1",
                seed: int = 0, classifier: str = "svm", augment=None,
                tol: float = DEFAULT_TOL, max_iter: int | None = None) -> GridSearchResult:
    """Exhaustively score every grid cell by internal k-fold CV (pooled
    scores).  Ties are broken toward the smallest C then the smallest gamma
    (or smallest sigma).  Folds whose training part is single-class are
    skipped and the cell flagged."""
    if folds < 2:
        raise ValueError("folds must be >= 2")
    if metric not in ("f1", "aucpr"):
        raise ValueError(f"metric must be f1 or aucpr, got {metric!r}")
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    fold_idx = kfold_split(len(y), folds, seed)

    # assemble per-fold training/validation data once; SVM reuses the
    # squared-distance matrices across every (C, gamma) cell
    prepared = []
    for fi, val_idx in enumerate(fold_idx):
        tr_mask = np.ones(len(y), dtype=bool)
        tr_mask[val_idx] = False
        X_tr, y_tr = X[tr_mask], y[tr_mask]
        if augment is not None:
            X_tr, y_tr = augment(X_tr, y_tr)
        ok = bool(np.any(y_tr > 0) and np.any(y_tr < 0))
        entry = {"fold": fi, "ok": ok, "y_tr": y_tr, "val_idx": val_idx}
        if ok and classifier == "svm":
            entry["d_tr"] = squared_distances(X_tr, X_tr)
            entry["d_val"] = squared_distances(X[val_idx], X_tr)
        elif ok and classifier == "bh":
            entry["pos_tr"] = X_tr[y_tr > 0]
        prepared.append(entry)

    if classifier == "svm":
        cells = [{"C": float(c), "gamma": float(g)}
                 for c in sorted(grid.c_values) for g in sorted(grid.gamma_values)]
    elif classifier == "bh":
        cells = [{"sigma": float(s)} for s in sorted(grid.sigma_values)]
    else:
        raise ValueError(f"classifier must be svm or bh, got {classifier!r}")

    table = []
    best_params, best_score = None, -np.inf
    for params in cells:
        pooled_scores, pooled_labels = [], []
        flagged = False
        for entry in prepared:
            if not entry["ok"]:
                flagged = True
                continue
            val_idx = entry["val_idx"]
            if classifier == "svm":
                K_tr = np.exp(-params["gamma"] * entry["d_tr"])
                alpha, bias, _, _, conv = smo_solve(K_tr, entry["y_tr"], params["C"],
                                                    tol, max_iter)
                flagged = flagged or not conv
                scores = np.exp(-params["gamma"] * entry["d_val"]) @ (alpha * entry["y_tr"]) + bias
            else:
                model = BhModel(entry["pos_tr"], params["sigma"])
                scores = bh_likelihood(model, X[val_idx])
            pooled_scores.append(scores)
            pooled_labels.append(y[val_idx])
            fold_pos = np.sum(y[val_idx] > 0)
            if fold_pos > 0:
                table.append(GridCell(params, entry["fold"], metric,
                                      _score_pooled(scores, y[val_idx], metric)))

        if pooled_scores:
            value = _score_pooled(np.concatenate(pooled_scores),
                                  np.concatenate(pooled_labels), metric)
        else:
            value, flagged = -np.inf, True
        table.append(GridCell(params, "pooled", metric, value, flagged))
        if value > best_score:
            best_score, best_params = value, params

    return GridSearchResult(best_params, best_score, metric, table)


def grid_table_csv(result: GridSearchResult) -> str:
    keys = sorted({k for cell in result.table for k in cell.params})
    lines = [",".join(keys) + ",fold,metric,value,flagged"]
    for cell in result.table:
        row = [repr(float(cell.params.get(k, float("nan")))) for k in keys]
        row += [str(cell.fold), cell.metric, repr(float(cell.value)), str(int(cell.flagged))]
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"
