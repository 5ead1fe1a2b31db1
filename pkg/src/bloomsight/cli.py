"""Command-line interface.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric
non-convergence, 4 partial failure (some detections could not be scored).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .bundle import BundleError, load_bundle, save_bundle
from .classify import GridSpec, HsvThresholdConfig, grid_search, grid_table_csv
from .features import ExternalFeatureError, load_external_features
from .imgio import read_image_rgb, write_image_rgb
from .manifest import load_manifest
from .metrics import (cross_validate, pr_plot_svg, curve_to_csv,
                      report_from_scores, report_to_json)
from .pipeline import (TrainConfig, TransferConfig, _augment_replicate,
                       collect_samples, detect_image, detections_csv,
                       evaluate_bundle, hsvthresh_scores, render_overlay,
                       train_pipeline, transfer_preprocess)
from .slic import SlicConfig, save_labeling, slic_segment
from .svm import svm_decision, svm_train
from .classify import bh_likelihood, bh_train

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NONCONVERGENCE = 3
EXIT_PARTIAL = 4


class _UsageExit(Exception):
    pass


class CliParser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise _UsageExit()


def _parse_grid(text: str) -> GridSpec | None:
    """Grid syntax: 'C=1,3,10;gamma=1e-4,1e-3' (also sigma=...).  'none'
    disables the search, 'default' uses the built-in grid."""
    if text == "none":
        return None
    if text == "default":
        return GridSpec()
    fields = {}
    for chunk in text.split(";"):
        if "=" not in chunk:
            raise ValueError(f"bad grid chunk {chunk!r}; expected name=v1,v2,...")
        name, values = chunk.split("=", 1)
        key = {"C": "c_values", "gamma": "gamma_values", "sigma": "sigma_values"}.get(name.strip())
        if key is None:
            raise ValueError(f"unknown grid parameter {name!r}")
        fields[key] = tuple(float(v) for v in values.split(","))
    return GridSpec(**fields)


def _slic_config(args) -> SlicConfig:
    return SlicConfig(
        target_count=getattr(args, "k", None),
        compactness=getattr(args, "compactness", 10.0),
        max_iterations=getattr(args, "iterations", 10),
    )


def _add_slic_args(p, with_k_default=None):
    p.add_argument("--k", type=int, default=with_k_default,
                   help="target superpixel count (default: ~1 per 19.6k pixels)")
    p.add_argument("--compactness", type=float, default=10.0)
    p.add_argument("--iterations", type=int, default=10)


def build_parser() -> CliParser:
    parser = CliParser(prog="bloomsight", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("segment", help="SLIC superpixel segmentation only")
    p.add_argument("--image", required=True)
    _add_slic_args(p)
    p.add_argument("--out", required=True, help="labeling output path")

    p = sub.add_parser("train", help="train a detector and write a model bundle")
    p.add_argument("--manifest", required=True)
    p.add_argument("--features", default="hsv",
                   help="'hsv' or 'external:<feature-file>'")
    p.add_argument("--portrait", default="mean_pad", choices=["mean_pad", "original", "blur"])
    p.add_argument("--pca-k", default="none", help="'none' or an integer")
    p.add_argument("--classifier", default="svm", choices=["svm", "bh", "hsvthresh"])
    p.add_argument("--grid", default="none", help="'none', 'default', or 'C=..;gamma=..'")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--C", type=float, default=10.0)
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--sigma", type=float, default=5.0)
    p.add_argument("--folds", type=int, default=5, help="grid-search CV folds")
    p.add_argument("--metric", default="f1", choices=["f1", "aucpr"])
    p.add_argument("--no-augment", action="store_true")
    _add_slic_args(p)
    p.add_argument("--out", required=True)

    p = sub.add_parser("predict", help="detect flowers in one image")
    p.add_argument("--bundle", required=True)
    p.add_argument("--image", required=True)
    p.add_argument("--image-id", default=None,
                   help="key for external feature lookup (default: file stem)")
    p.add_argument("--features-file", default=None,
                   help="external feature CSV (required for external-feature bundles)")
    p.add_argument("--transfer", action="store_true",
                   help="apply the transfer pre-processing chain first")
    p.add_argument("--bg-modes", type=int, default=2)
    p.add_argument("--bg-min-cluster", type=int, default=1200)
    _add_slic_args(p)
    p.add_argument("--out", required=True, help="detections CSV path")
    p.add_argument("--overlay", default=None, help="optional overlay PNG path")

    p = sub.add_parser("evaluate", help="evaluate a bundle over a manifest split")
    p.add_argument("--bundle", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--split", default="validation", choices=["train", "validation"])
    p.add_argument("--features-file", default=None)
    _add_slic_args(p)
    p.add_argument("--out-dir", required=True)

    p = sub.add_parser("crossval", help="k-fold comparison of methods over all samples")
    p.add_argument("--manifest", required=True)
    p.add_argument("--folds", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--classifier", action="append", required=True,
                   choices=["svm", "bh", "hsvthresh"],
                   help="repeat for a multi-method comparison")
    p.add_argument("--C", type=float, default=10.0)
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--sigma", type=float, default=5.0)
    p.add_argument("--no-augment", action="store_true")
    _add_slic_args(p)
    p.add_argument("--out-dir", required=True)

    p = sub.add_parser("gridsearch", help="hyperparameter grid search on the training split")
    p.add_argument("--manifest", required=True)
    p.add_argument("--grid", default="default")
    p.add_argument("--metric", default="f1", choices=["f1", "aucpr"])
    p.add_argument("--classifier", default="svm", choices=["svm", "bh"])
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--no-augment", action="store_true")
    _add_slic_args(p)
    p.add_argument("--out", default=None, help="score table CSV path")

    p = sub.add_parser("synth", help="generate a synthetic dataset with ground truth")
    p.add_argument("--spec", default=None, help="scene spec JSON (defaults used if omitted)")
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--val-count", type=int, default=0)
    p.add_argument("--out-dir", required=True)

    return parser


def cmd_segment(args) -> int:
    img = read_image_rgb(args.image)
    cfg = _slic_config(args)
    lab = slic_segment(img, cfg)
    save_labeling(args.out, lab, cfg)
    print(f"wrote {args.out}: {lab.k} superpixels")
    return EXIT_OK


def cmd_train(args) -> int:
    manifest = load_manifest(args.manifest)
    feature, external_path = args.features, None
    if feature.startswith("external:"):
        feature, external_path = "external", feature.split(":", 1)[1]
    elif feature != "hsv":
        raise ValueError(f"--features must be 'hsv' or 'external:<file>', got {feature!r}")
    pca_k = None if args.pca_k == "none" else int(args.pca_k)
    cfg = TrainConfig(
        feature=feature, external_path=external_path, portrait_mode=args.portrait,
        pca_k=pca_k, classifier=args.classifier, C=args.C, gamma=args.gamma,
        sigma=args.sigma, grid=_parse_grid(args.grid), grid_folds=args.folds,
        grid_metric=args.metric, seed=args.seed, augment=not args.no_augment,
        slic=_slic_config(args),
    )
    bundle = train_pipeline(manifest, cfg)
    save_bundle(bundle, args.out)
    print(f"wrote bundle {args.out} ({bundle.classifier_kind})")
    if bundle.classifier_kind == "svm" and not bundle.classifier.converged:
        print(f"warning: SMO did not converge (KKT gap {bundle.classifier.kkt_gap:.3g})",
              file=sys.stderr)
        return EXIT_NONCONVERGENCE
    return EXIT_OK


def cmd_predict(args) -> int:
    bundle = load_bundle(args.bundle)
    img = read_image_rgb(args.image)
    image_id = args.image_id or Path(args.image).stem
    if args.transfer:
        tcfg = TransferConfig(n_modes=args.bg_modes, min_cluster_px=args.bg_min_cluster)
        img = transfer_preprocess(img, bundle, tcfg)
    source = None
    if bundle.feature_kind.startswith("external"):
        if args.features_file is None:
            raise ValueError("bundle uses external features; pass --features-file")
        source = load_external_features(args.features_file, bundle.feature_dim)
    cfg = _slic_config(args)
    detections, errors = detect_image(img, bundle, cfg, image_id, source)
    Path(args.out).write_text(detections_csv(detections))
    if args.overlay:
        lab = slic_segment(img, cfg)
        positive = [d.superpixel_id for d in detections if d.predicted]
        write_image_rgb(args.overlay, render_overlay(img, lab.ids, positive))
    n_pos = sum(d.predicted for d in detections)
    print(f"wrote {args.out}: {n_pos}/{len(detections)} superpixels positive")
    if errors:
        for e in errors[:5]:
            print(f"missing features: {e.message}", file=sys.stderr)
        print(f"{len(errors)} superpixels could not be scored", file=sys.stderr)
        return EXIT_PARTIAL
    return EXIT_OK


def cmd_evaluate(args) -> int:
    bundle = load_bundle(args.bundle)
    manifest = load_manifest(args.manifest)
    source = None
    if bundle.feature_kind.startswith("external"):
        if args.features_file is None:
            raise ValueError("bundle uses external features; pass --features-file")
        source = load_external_features(args.features_file, bundle.feature_dim)
    report = evaluate_bundle(bundle, manifest, args.split, _slic_config(args), source)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(report_to_json(report))
    (out / "curve.csv").write_text(curve_to_csv(report.curve))
    (out / "pr.svg").write_text(pr_plot_svg({bundle.classifier_kind: report.curve}))
    print(f"{args.split}: AUC-PR {report.auc_pr:.4f}, best F1 {report.best_f1:.4f}")
    return EXIT_OK


def _method_trainer(method, args):
    if method == "svm":
        def trainer(X, y):
            model = svm_train(X, y, args.C, args.gamma)
            return lambda Xv: svm_decision(model, Xv)
        return trainer
    def trainer(X, y):
        model = bh_train(X, y, args.sigma)
        return lambda Xv: bh_likelihood(model, Xv)
    return trainer


def cmd_crossval(args) -> int:
    manifest = load_manifest(args.manifest)
    slic_cfg = _slic_config(args)
    cfg = TrainConfig(slic=slic_cfg)
    methods = list(dict.fromkeys(args.classifier))
    augment = None if args.no_augment else _augment_replicate
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    X, y, _, _ = collect_samples(manifest, cfg, split="all")
    curves, summary = {}, []
    for method in methods:
        if method == "hsvthresh":
            scores, labels = hsvthresh_scores(manifest, HsvThresholdConfig(), slic_cfg)
            report = report_from_scores(scores, labels)
        else:
            report = cross_validate(X, y, args.folds, _method_trainer(method, args),
                                    args.seed, augment=augment)
        curves[method] = report.curve
        summary.append((method, report))
        (out / f"report_{method}.json").write_text(report_to_json(report))
        (out / f"curve_{method}.csv").write_text(curve_to_csv(report.curve))
        print(f"{method}: AUC-PR {report.auc_pr:.4f}, best F1 {report.best_f1:.4f}")
    (out / "pr.svg").write_text(pr_plot_svg(curves))
    return EXIT_OK


def cmd_gridsearch(args) -> int:
    manifest = load_manifest(args.manifest)
    cfg = TrainConfig(slic=_slic_config(args))
    X, y, _, _ = collect_samples(manifest, cfg, split="train")
    grid = _parse_grid(args.grid) or GridSpec()
    augment = None if args.no_augment else _augment_replicate
    result = grid_search(X, y, grid, args.folds, args.metric, args.seed,
                         args.classifier, augment=augment)
    if args.out:
        Path(args.out).write_text(grid_table_csv(result))
    print(f"best {result.metric}: {result.best_score:.4f} at {result.best_params}")
    return EXIT_OK


def cmd_synth(args) -> int:
    from .synth import SceneSpec, synth_dataset

    spec = SceneSpec.from_json(args.spec) if args.spec else SceneSpec()
    manifest_path = synth_dataset(args.out_dir, spec, args.count, args.seed,
                                  val_count=args.val_count)
    print(f"wrote {args.count} scenes and {manifest_path}")
    return EXIT_OK


_COMMANDS = {
    "segment": cmd_segment,
    "train": cmd_train,
    "predict": cmd_predict,
    "evaluate": cmd_evaluate,
    "crossval": cmd_crossval,
    "gridsearch": cmd_gridsearch,
    "synth": cmd_synth,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageExit:
        return EXIT_USAGE
    try:
        return _COMMANDS[args.command](args)
    except (FileNotFoundError, ValueError, KeyError, BundleError,
            ExternalFeatureError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
