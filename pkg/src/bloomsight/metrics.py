"""Evaluation protocol: PR curves, optimal F1, AUC-PR, k-fold CV.

PR curves sweep every distinct score as a threshold (predict positive iff
score >= t), descending, with tied scores grouped at one point.  AUC-PR
integrates precision over recall with the curve anchored at recall 0 using
the precision of the highest-scored group: each recall increment is scored
with the precision at the new threshold,

    AUC = sum_k (R_k - R_{k-1}) * P_k,   R_0 = 0.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np


@dataclass
class PrCurve:
    thresholds: np.ndarray
    recall: np.ndarray
    precision: np.ndarray
    tp: np.ndarray
    fp: np.ndarray
    fn: np.ndarray
    n_pos: int
    n_neg: int

    def __len__(self) -> int:
        return len(self.thresholds)


@dataclass
class FoldResult:
    fold: int
    n_val: int
    n_pos: int
    auc_pr: float | None
    best_f1: float | None


@dataclass
class EvalReport:
    auc_pr: float
    best_f1: float
    recall_at_best: float
    precision_at_best: float
    threshold_at_best: float
    curve: PrCurve
    per_fold: list = field(default_factory=list)


def pr_curve(scores, labels) -> PrCurve:
    """Exact PR curve over all distinct thresholds."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels)
    if scores.shape != labels.shape:
        raise ValueError("scores and labels must have the same shape")
    y = labels > 0
    n_pos = int(y.sum())
    n_neg = len(y) - n_pos
    if n_pos == 0:
        raise ValueError("pr_curve needs at least one positive label")

    order = np.argsort(-scores, kind="stable")
    s_sorted = scores[order]
    y_sorted = y[order]
    # indices of the last element of each tied-score group
    last = np.nonzero(np.diff(s_sorted))[0]
    ends = np.concatenate([last, [len(s_sorted) - 1]])
    tp = np.cumsum(y_sorted)[ends].astype(np.int64)
    pred_pos = ends + 1
    fp = pred_pos - tp
    fn = n_pos - tp
    recall = tp / n_pos
    precision = tp / pred_pos
    return PrCurve(s_sorted[ends], recall, precision, tp, fp, fn, n_pos, n_neg)


def auc_pr(c: PrCurve) -> float:
    return float(np.sum(np.diff(c.recall, prepend=0.0) * c.precision))


def f1_scores(c: PrCurve) -> np.ndarray:
    denom = c.precision + c.recall
    return np.divide(2.0 * c.precision * c.recall, denom,
                     out=np.zeros_like(denom), where=denom > 0)


def f1_optimal(c: PrCurve):
    """(f1, recall, precision, threshold) at the best curve point; ties go
    to the highest recall, then the highest threshold."""
    f1 = f1_scores(c)
    best = max(range(len(c)), key=lambda i: (f1[i], c.recall[i], c.thresholds[i]))
    return float(f1[best]), float(c.recall[best]), float(c.precision[best]), float(c.thresholds[best])


def kfold_split(n: int, k: int, seed: int) -> list[np.ndarray]:
    """Seeded random partition of [0, n) into k folds with sizes n//k or
    n//k + 1."""
    if k < 1 or k > n:
        raise ValueError(f"need 1 <= k <= n, got k={k}, n={n}")
    perm = np.random.default_rng(seed).permutation(n)
    base, extra = divmod(n, k)
    folds, start = [], 0
    for i in range(k):
        size = base + (1 if i < extra else 0)
        folds.append(np.sort(perm[start : start + size]))
        start += size
    return folds


def cross_validate(X, y, k: int, trainer, seed: int, augment=None) -> EvalReport:
    """k-fold CV with pooled scoring.

    trainer(X_train, y_train) must return a callable scoring X_val.
    augment, if given, is applied to each fold's training portion only and
    must return (X_aug, y_aug).
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    folds = kfold_split(len(y), k, seed)
    all_scores = np.empty(len(y), dtype=float)
    per_fold = []
    for fi, val_idx in enumerate(folds):
        tr_mask = np.ones(len(y), dtype=bool)
        tr_mask[val_idx] = False
        y_tr = y[tr_mask]
        if not (np.any(y_tr > 0) and np.any(y_tr < 0)):
            raise ValueError(f"fold {fi}: training complement has a single class")
        X_tr = X[tr_mask]
        if augment is not None:
            X_tr, y_tr = augment(X_tr, y_tr)
        predict = trainer(X_tr, y_tr)
        scores = np.asarray(predict(X[val_idx]), dtype=float)
        all_scores[val_idx] = scores
        fold_pos = int(np.sum(y[val_idx] > 0))
        if fold_pos > 0:
            fc = pr_curve(scores, y[val_idx])
            per_fold.append(FoldResult(fi, len(val_idx), fold_pos, auc_pr(fc), f1_optimal(fc)[0]))
        else:
            per_fold.append(FoldResult(fi, len(val_idx), 0, None, None))

    curve = pr_curve(all_scores, y)
    best_f1, rec, prec, thr = f1_optimal(curve)
    return EvalReport(auc_pr(curve), best_f1, rec, prec, thr, curve, per_fold)


def report_from_scores(scores, labels) -> EvalReport:
    curve = pr_curve(scores, labels)
    best_f1, rec, prec, thr = f1_optimal(curve)
    return EvalReport(auc_pr(curve), best_f1, rec, prec, thr, curve, [])


# ---------------------------------------------------------------------------
# report output


def report_to_json(report: EvalReport) -> str:
    payload = {
        "auc_pr": report.auc_pr,
        "best_f1": report.best_f1,
        "recall_at_best": report.recall_at_best,
        "precision_at_best": report.precision_at_best,
        "threshold_at_best": report.threshold_at_best,
        "positives": report.curve.n_pos,
        "negatives": report.curve.n_neg,
        "per_fold": [
            {"fold": f.fold, "n_val": f.n_val, "n_pos": f.n_pos,
             "auc_pr": f.auc_pr, "best_f1": f.best_f1}
            for f in report.per_fold
        ],
    }
    return json.dumps(payload, indent=2, sort_keys=True)


def curve_to_csv(c: PrCurve) -> str:
    lines = ["threshold,recall,precision,tp,fp,fn"]
    for i in range(len(c)):
        lines.append(f"{c.thresholds[i]!r},{c.recall[i]!r},{c.precision[i]!r},"
                     f"{c.tp[i]},{c.fp[i]},{c.fn[i]}")
    return "\n".join(lines) + "\n"


_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def pr_plot_svg(curves: dict) -> str:
    """SVG PR plot: recall on x in [0, 1], precision on y in [0, 1], one
    polyline per method, legend annotated with AUC-PR."""
    width, height, margin = 480, 420, 50

    def sx(r):
        return margin + r * (width - 2 * margin)

    def sy(p):
        return height - margin - p * (height - 2 * margin)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<rect x="{margin}" y="{margin}" width="{width - 2 * margin}" '
        f'height="{height - 2 * margin}" fill="none" stroke="black"/>',
    ]
    for tick in (0.0, 0.25, 0.5, 0.75, 1.0):
        parts.append(f'<text x="{sx(tick):.1f}" y="{height - margin + 16}" '
                     f'font-size="11" text-anchor="middle">{tick:g}</text>')
        parts.append(f'<text x="{margin - 8}" y="{sy(tick) + 4:.1f}" '
                     f'font-size="11" text-anchor="end">{tick:g}</text>')
    parts.append(f'<text x="{width / 2}" y="{height - 10}" font-size="13" '
                 f'text-anchor="middle">Recall</text>')
    parts.append(f'<text x="14" y="{height / 2}" font-size="13" text-anchor="middle" '
                 f'transform="rotate(-90 14 {height / 2})">Precision</text>')

    for idx, (name, curve) in enumerate(curves.items()):
        color = _PALETTE[idx % len(_PALETTE)]
        area = auc_pr(curve)
        pts = [(0.0, curve.precision[0])] + list(zip(curve.recall, curve.precision))
        path = " ".join(f"{sx(r):.2f},{sy(p):.2f}" for r, p in pts)
        parts.append(f'<polyline points="{path}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        ly = margin + 18 + 16 * idx
        parts.append(f'<line x1="{margin + 10}" y1="{ly - 4}" x2="{margin + 34}" '
                     f'y2="{ly - 4}" stroke="{color}" stroke-width="2"/>')
        parts.append(f'<text x="{margin + 40}" y="{ly}" font-size="12">'
                     f'{name} (AUC-PR {area:.3f})</text>')
    parts.append("</svg>")
    return "\n".join(parts)
