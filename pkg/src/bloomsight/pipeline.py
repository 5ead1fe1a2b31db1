"""End-to-end orchestration: training, per-image detection, transfer
pre-processing, and evaluation over manifests.

Mirror augmentation is realized in portrait space.  The built-in HSV
histogram of a superpixel is invariant under mirroring (set semantics), so
re-extracting from a mirrored portrait reproduces the original vector and
the positive rows are replicated directly.  External (CNN) features are not
flip-invariant, so the feature file must supply vectors for the mirrored
variant keys (superpixel_id:v, :h, :b).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .bundle import ModelBundle
from .classify import (BhModel, GridSpec, HsvThresholdConfig, bh_likelihood,
                       bh_train, grid_search, hsv_threshold_detect)
from .features import (HSV_HIST_DIM, ExternalFeatureSource,
                       hsv_histogram_features_all)
from .imageops import (Histogram, connected_components, equalization_map,
                       filter_components_by_size, hsv_to_rgb, local_entropy,
                       luminance, matching_map, mean_rgb, otsu_threshold,
                       quantize, rgb_to_hsv, shift_value_channel)
from .imgio import read_image_rgb, read_mask_pgm
from .manifest import DatasetManifest
from .metrics import EvalReport, f1_optimal, pr_curve, report_from_scores
from .pca import pca_fit, pca_project
from .portraits import MIRROR_VARIANTS
from .slic import SlicConfig, assign_labels_from_mask, slic_segment
from .svm import svm_decision, svm_train

SAT_REFERENCE_BINS = 256


@dataclass
class Detection:
    image_id: str
    superpixel_id: int
    score: float
    predicted: bool


@dataclass
class DetectError:
    image_id: str
    superpixel_id: int
    message: str


@dataclass(frozen=True)
class TrainConfig:
    feature: str = "hsv"                  # "hsv" or "external"
    external_path: str | None = None
    external_dim: int = 4096
    portrait_mode: str = "mean_pad"
    portrait_size: int = 227
    pca_k: int | None = None              # None: skip reduction
    classifier: str = "svm"               # "svm" | "bh" | "hsvthresh"
    C: float = 10.0
    gamma: float = 1.0
    sigma: float = 5.0
    hsv_threshold: HsvThresholdConfig = HsvThresholdConfig()
    grid: GridSpec | None = None
    grid_folds: int = 5
    grid_metric: str = "f1"
    seed: int = 0
    augment: bool = True
    label_area_fraction: float = 0.5
    slic: SlicConfig = SlicConfig()
    svm_tol: float = 1e-3
    svm_max_iter: int | None = None


@dataclass(frozen=True)
class TransferConfig:
    n_modes: int = 2
    distance_threshold: float = 40.0      # 8-bit RGB Euclidean units
    entropy_window: int = 9
    entropy_levels: int = 256
    min_cluster_px: int = 1200
    max_cluster_px: int | None = None
    connectivity: int = 8
    expand_background: bool = True

    def __post_init__(self):
        if self.n_modes < 1:
            raise ValueError("n_modes must be >= 1")


@dataclass
class BackgroundModel:
    modes: np.ndarray          # (n, 3) reference RGB means
    distance_threshold: float


# ---------------------------------------------------------------------------
# feature assembly


def _augment_replicate(X, y):
    """Feature-space mirror augmentation for flip-invariant features:
    each positive row appears 4x, negatives pass through."""
    pos = np.asarray(y) > 0
    X = np.asarray(X)
    X_aug = np.concatenate([X, np.repeat(X[pos], 3, axis=0)])
    y_aug = np.concatenate([np.asarray(y), np.repeat(np.asarray(y)[pos], 3)])
    return X_aug, y_aug


def augmenter_for(feature_kind: str):
    """Per-fold training augmentation hook (positives x4)."""
    if feature_kind.startswith("external"):
        raise ValueError("per-fold augmentation of external features requires variant "
                         "lookups; assemble augmented matrices via collect_samples instead")
    return _augment_replicate


def _external_lookup(source: ExternalFeatureSource, image_id, k, variant="o"):
    rows, missing = [], []
    for sid in range(k):
        try:
            rows.append(source.get(image_id, sid, variant))
        except KeyError as exc:
            rows.append(np.full(source.dimension, np.nan))
            missing.append(DetectError(image_id, sid, str(exc)))
    return np.array(rows), missing


def collect_samples(manifest: DatasetManifest, cfg: TrainConfig,
                    source: ExternalFeatureSource | None = None,
                    split: str = "train"):
    """Segment every image in a split ("train", "validation", or "all") and
    assemble (features, labels ±1, keys, augmented_positive_features)."""
    entries = manifest.entries if split == "all" else manifest.split_entries(split)
    if not entries:
        raise ValueError(f"manifest has no {split} entries")
    feats, labels, keys, aug_rows = [], [], [], []
    for entry in entries:
        img = read_image_rgb(manifest.image_path(entry))
        mask = read_mask_pgm(manifest.mask_path(entry))
        lab = slic_segment(img, cfg.slic)
        pos = assign_labels_from_mask(lab, mask, cfg.label_area_fraction)
        if cfg.feature == "hsv":
            F = hsv_histogram_features_all(rgb_to_hsv(img), lab)
            extra = {v: F[pos] for v in MIRROR_VARIANTS[1:]}
        else:
            F, missing = _external_lookup(source, entry.image_id, lab.k)
            if missing:
                raise KeyError(missing[0].message)
            extra = {}
            for v in MIRROR_VARIANTS[1:]:
                rows = []
                for sid in np.nonzero(pos)[0]:
                    rows.append(source.get(entry.image_id, int(sid), v))
                extra[v] = np.array(rows) if rows else np.empty((0, source.dimension))
        feats.append(F)
        labels.append(np.where(pos, 1.0, -1.0))
        keys.extend((entry.image_id, sid) for sid in range(lab.k))
        for v in MIRROR_VARIANTS[1:]:
            aug_rows.append(extra[v])
    X = np.concatenate(feats)
    y = np.concatenate(labels)
    X_aug_pos = np.concatenate(aug_rows) if aug_rows else np.empty((0, X.shape[1]))
    return X, y, keys, X_aug_pos


def _reference_statistics(manifest: DatasetManifest, entries):
    """Pooled saturation histogram and value-channel mean over a split."""
    sat_counts = np.zeros(SAT_REFERENCE_BINS)
    v_total, pixels = 0.0, 0
    for entry in entries:
        hsv = rgb_to_hsv(read_image_rgb(manifest.image_path(entry)))
        q = quantize(hsv[..., 1], SAT_REFERENCE_BINS)
        sat_counts += np.bincount(q.ravel(), minlength=SAT_REFERENCE_BINS)
        v_total += hsv[..., 2].sum()
        pixels += hsv.shape[0] * hsv.shape[1]
    edges = np.linspace(0.0, 1.0, SAT_REFERENCE_BINS + 1)
    sat_ref = Histogram(edges, sat_counts / sat_counts.sum(), normalized=True)
    return sat_ref, v_total / pixels


# ---------------------------------------------------------------------------
# training


def train_pipeline(manifest: DatasetManifest, cfg: TrainConfig = TrainConfig()) -> ModelBundle:
    """Train a detector on the manifest's training split and assemble the
    model bundle."""
    entries = manifest.split_entries("train")
    if not entries:
        raise ValueError("manifest has no training entries")
    images = [read_image_rgb(manifest.image_path(e)) for e in entries]
    dataset_mean = mean_rgb(images)
    del images
    sat_ref, v_ref = _reference_statistics(manifest, entries)

    source = None
    feature_kind = cfg.feature
    if cfg.feature == "external":
        from .features import load_external_features

        source = load_external_features(cfg.external_path, cfg.external_dim)
        feature_kind = f"external:{source.name}"
        feature_dim = source.dimension
    else:
        feature_dim = HSV_HIST_DIM

    provenance = {"seed": cfg.seed, "grid_cell": None}
    if cfg.classifier == "hsvthresh":
        bundle = ModelBundle(
            portrait_size=cfg.portrait_size, portrait_mode=cfg.portrait_mode,
            dataset_mean=dataset_mean, feature_kind=feature_kind,
            feature_dim=feature_dim, pca=None, classifier_kind="hsvthresh",
            classifier=cfg.hsv_threshold, threshold=0.5,
            saturation_reference=sat_ref, value_reference_mean=v_ref,
            provenance=provenance,
        )
        bundle.validate()
        return bundle

    X, y, _, X_aug_pos = collect_samples(manifest, cfg, source, "train")
    if not (np.any(y > 0) and np.any(y < 0)):
        raise ValueError("training split labels are single-class")

    pca = None
    if cfg.pca_k is not None:
        pca = pca_fit(X, cfg.pca_k)  # fit on unaugmented features
        X = pca_project(pca, X)
        X_aug_pos = pca_project(pca, X_aug_pos) if len(X_aug_pos) else X_aug_pos

    if cfg.augment:
        X_train = np.concatenate([X, X_aug_pos]) if len(X_aug_pos) else X
        y_train = np.concatenate([y, np.ones(len(X_aug_pos))])
    else:
        X_train, y_train = X, y

    grid_cell = None
    if cfg.classifier == "svm":
        C, gamma = cfg.C, cfg.gamma
        if cfg.grid is not None:
            # grid CV re-augments inside each fold, so search on raw samples
            result = grid_search(X, y, cfg.grid, cfg.grid_folds, cfg.grid_metric,
                                 cfg.seed, "svm",
                                 augment=_augment_replicate if cfg.augment else None,
                                 tol=cfg.svm_tol, max_iter=cfg.svm_max_iter)
            C, gamma = result.best_params["C"], result.best_params["gamma"]
            grid_cell = result.best_params
        clf = svm_train(X_train, y_train, C, gamma, cfg.svm_tol, cfg.svm_max_iter, cfg.seed)
        threshold = 0.0
        kind = "svm"
    elif cfg.classifier == "bh":
        if cfg.feature != "hsv" or cfg.pca_k is not None:
            raise ValueError("the Bhattacharyya classifier requires raw HSV histograms")
        sigma = cfg.sigma
        if cfg.grid is not None:
            result = grid_search(X, y, cfg.grid, cfg.grid_folds, cfg.grid_metric,
                                 cfg.seed, "bh",
                                 augment=_augment_replicate if cfg.augment else None)
            sigma = result.best_params["sigma"]
            grid_cell = result.best_params
        clf = bh_train(X_train, y_train, sigma)
        train_scores = bh_likelihood(clf, X)
        threshold = f1_optimal(pr_curve(train_scores, y))[3]
        clf.threshold = threshold
        kind = "bh"
    else:
        raise ValueError(f"unknown classifier {cfg.classifier!r}")

    provenance["grid_cell"] = grid_cell
    bundle = ModelBundle(
        portrait_size=cfg.portrait_size, portrait_mode=cfg.portrait_mode,
        dataset_mean=dataset_mean, feature_kind=feature_kind,
        feature_dim=feature_dim, pca=pca, classifier_kind=kind, classifier=clf,
        threshold=threshold, saturation_reference=sat_ref,
        value_reference_mean=v_ref, provenance=provenance,
    )
    bundle.validate()
    return bundle


# ---------------------------------------------------------------------------
# detection


def detect_image(img: np.ndarray, bundle: ModelBundle,
                 slic_cfg: SlicConfig = SlicConfig(), image_id: str = "",
                 source: ExternalFeatureSource | None = None):
    """Run the detection sequence on one image: segment, featurize, reduce,
    classify.  Returns (detections, errors); errors are per-superpixel
    feature lookups that failed (external features only), in which case the
    corresponding detection carries a NaN score and predicted=False."""
    bundle.validate()
    lab = slic_segment(img, slic_cfg)
    errors = []

    if bundle.classifier_kind == "hsvthresh":
        mask = hsv_threshold_detect(rgb_to_hsv(img), bundle.classifier)
        covered = np.bincount(lab.ids[mask], minlength=lab.k)
        scores = covered / lab.counts
    else:
        if bundle.feature_kind == "hsv":
            F = hsv_histogram_features_all(rgb_to_hsv(img), lab)
        else:
            if source is None:
                raise ValueError("bundle uses external features; an ExternalFeatureSource is required")
            F, errors = _external_lookup(source, image_id, lab.k)
        if bundle.pca is not None:
            F = pca_project(bundle.pca, F)
        valid = ~np.isnan(F).any(axis=1)
        scores = np.full(lab.k, np.nan)
        if valid.any():
            if bundle.classifier_kind == "svm":
                scores[valid] = svm_decision(bundle.classifier, F[valid])
            else:
                scores[valid] = bh_likelihood(bundle.classifier, F[valid])

    detections = []
    for sid in range(lab.k):
        s = float(scores[sid])
        predicted = bool(not np.isnan(s) and s >= bundle.threshold)
        detections.append(Detection(image_id, sid, s, predicted))
    return detections, errors


def detections_csv(detections) -> str:
    lines = ["image_id,superpixel_id,score,predicted"]
    for d in detections:
        lines.append(f"{d.image_id},{d.superpixel_id},{d.score!r},{int(d.predicted)}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# transfer pre-processing


def find_background(img: np.ndarray, tcfg: TransferConfig = TransferConfig()):
    """Low-texture background detection: local entropy, Otsu binarization,
    size filtering, then an n-modal RGB reference built from the n largest
    clusters.  Returns (mask, BackgroundModel)."""
    img = np.asarray(img, dtype=float)
    ent = local_entropy(luminance(img), tcfg.entropy_window, tcfg.entropy_levels)
    max_bits = np.log2(tcfg.entropy_levels)
    q = quantize(ent / max_bits, 256)
    counts = np.bincount(q.ravel(), minlength=256).astype(float)
    if np.count_nonzero(counts) < 2:
        low_texture = np.zeros(img.shape[:2], dtype=bool) if counts.argmax() > 0 \
            else np.ones(img.shape[:2], dtype=bool)
    else:
        t = otsu_threshold(counts)
        low_texture = q < t

    max_px = tcfg.max_cluster_px if tcfg.max_cluster_px is not None else img.shape[0] * img.shape[1]
    filtered = filter_components_by_size(low_texture, tcfg.min_cluster_px, max_px,
                                         tcfg.connectivity)
    labels, sizes = connected_components(filtered, tcfg.connectivity)
    if len(sizes) == 0:
        warnings.warn("no low-texture clusters found; background model is empty")
        return np.zeros(img.shape[:2], dtype=bool), BackgroundModel(np.empty((0, 3)),
                                                                    tcfg.distance_threshold)

    order = np.argsort(-sizes, kind="stable")
    n_modes = min(tcfg.n_modes, len(sizes))
    if n_modes < tcfg.n_modes:
        warnings.warn(f"only {n_modes} low-texture clusters available for "
                      f"{tcfg.n_modes} background modes")
    cluster_means = np.array([img[labels == cid + 1].mean(axis=0) for cid in range(len(sizes))])
    modes = cluster_means[order[:n_modes]]

    background = np.zeros(img.shape[:2], dtype=bool)
    for cid in range(len(sizes)):
        d = np.sqrt(((cluster_means[cid] - modes) ** 2).sum(axis=1)).min()
        if d < tcfg.distance_threshold:
            background |= labels == cid + 1

    if tcfg.expand_background and background.any():
        # grow into the entropy-transition strip around each cluster: absorb
        # adjacent pixels whose color stays within the distance threshold of
        # the nearest mode
        from scipy.ndimage import binary_dilation

        d_to_modes = np.sqrt(
            ((img[None, ...] - modes[:, None, None, :]) ** 2).sum(axis=-1)
        ).min(axis=0)
        color_ok = d_to_modes < tcfg.distance_threshold
        for _ in range(tcfg.entropy_window // 2 + 2):
            grown = binary_dilation(background, _conn_structure(tcfg.connectivity)) & color_ok
            if (grown == background).all():
                break
            background = grown

    return background, BackgroundModel(modes, tcfg.distance_threshold)


def _conn_structure(connectivity: int):
    from .imageops import _structure

    return _structure(connectivity)


def transfer_preprocess(img: np.ndarray, bundle: ModelBundle,
                        tcfg: TransferConfig = TransferConfig()) -> np.ndarray:
    """Adapt an unseen image toward the training distribution: replace
    low-texture background with the dataset mean, equalize + match the
    saturation channel to the bundle's reference histogram, and shift the
    value channel to the reference mean.  The hue channel is untouched.

    Remap statistics come from the non-replaced (content) pixels so the
    synthetic fill cannot skew the histograms; the remaps themselves apply
    to the whole channel.
    """
    img = np.asarray(img, dtype=float)
    background, _ = find_background(img, tcfg)
    replaced = img.copy()
    replaced[background] = np.asarray(bundle.dataset_mean, dtype=float)

    hsv = rgb_to_hsv(replaced)
    content = ~background
    sat = hsv[..., 1]
    stats_src = sat[content] if content.any() else sat
    eq_map = equalization_map(stats_src, SAT_REFERENCE_BINS)
    eq_levels = quantize(eq_map, SAT_REFERENCE_BINS)
    match_map = matching_map(eq_map[quantize(stats_src, SAT_REFERENCE_BINS)],
                             bundle.saturation_reference, SAT_REFERENCE_BINS)
    hsv[..., 1] = match_map[eq_levels[quantize(sat, SAT_REFERENCE_BINS)]]

    hsv = shift_value_channel(hsv, bundle.value_reference_mean)
    return hsv_to_rgb(hsv)


def hsvthresh_scores(manifest: DatasetManifest, cfg: HsvThresholdConfig,
                     slic_cfg: SlicConfig = SlicConfig(), split: str = "all",
                     label_area_fraction: float = 0.5):
    """Per-superpixel overlap fraction with the pixel-level HSV detection
    mask, plus mask-derived labels.  Used for curve-style evaluation of the
    thresholding baseline."""
    entries = manifest.entries if split == "all" else manifest.split_entries(split)
    scores, labels = [], []
    for entry in entries:
        img = read_image_rgb(manifest.image_path(entry))
        mask = read_mask_pgm(manifest.mask_path(entry))
        lab = slic_segment(img, slic_cfg)
        det = hsv_threshold_detect(rgb_to_hsv(img), cfg)
        covered = np.bincount(lab.ids[det], minlength=lab.k)
        scores.append(covered / lab.counts)
        pos = assign_labels_from_mask(lab, mask, label_area_fraction)
        labels.append(np.where(pos, 1.0, -1.0))
    return np.concatenate(scores), np.concatenate(labels)


def render_overlay(img: np.ndarray, ids: np.ndarray, positive_ids,
                   fill_rgb=(235, 45, 45), stroke_rgb=(255, 235, 40),
                   alpha: float = 0.45) -> np.ndarray:
    """Paint positive superpixels: semi-transparent fill plus a solid
    boundary stroke."""
    img = np.asarray(img, dtype=float)
    positive = np.isin(ids, np.asarray(list(positive_ids), dtype=ids.dtype))
    out = img.copy()
    out[positive] = (1 - alpha) * img[positive] + alpha * np.asarray(fill_rgb, dtype=float)

    edge = np.zeros_like(positive)
    edge[:, 1:] |= positive[:, 1:] & ~positive[:, :-1]
    edge[:, :-1] |= positive[:, :-1] & ~positive[:, 1:]
    edge[1:, :] |= positive[1:, :] & ~positive[:-1, :]
    edge[:-1, :] |= positive[:-1, :] & ~positive[1:, :]
    out[edge] = np.asarray(stroke_rgb, dtype=float)
    return out


# ---------------------------------------------------------------------------
# evaluation over manifests


def evaluate_bundle(bundle: ModelBundle, manifest: DatasetManifest,
                    split: str = "validation", slic_cfg: SlicConfig = SlicConfig(),
                    source: ExternalFeatureSource | None = None,
                    label_area_fraction: float = 0.5,
                    transfer: TransferConfig | None = None) -> EvalReport:
    """Score every superpixel of a split against the mask-derived labels."""
    entries = manifest.split_entries(split)
    if not entries:
        raise ValueError(f"manifest has no {split} entries")
    scores, labels = [], []
    for entry in entries:
        img = read_image_rgb(manifest.image_path(entry))
        if transfer is not None:
            img = transfer_preprocess(img, bundle, transfer)
        mask = read_mask_pgm(manifest.mask_path(entry))
        lab = slic_segment(img, slic_cfg)
        pos = assign_labels_from_mask(lab, mask, label_area_fraction)
        dets, errors = detect_image(img, bundle, slic_cfg, entry.image_id, source)
        if errors:
            raise KeyError(f"{len(errors)} missing feature vectors for {entry.image_id}")
        scores.append([d.score for d in dets])
        labels.append(np.where(pos, 1.0, -1.0))
    return report_from_scores(np.concatenate(scores), np.concatenate(labels))
