"""Model bundle persistence: everything a trained detector needs, in one
checksummed JSON file.

Reals serialize through Python's repr, which round-trips float64 exactly,
so load(save(bundle)) compares equal field-by-field and identical bundles
serialize to identical bytes.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from .classify import BhModel, HsvThresholdConfig
from .imageops import Histogram
from .pca import PcaModel
from .svm import SvmModel

BUNDLE_FORMAT = "bloomsight-bundle"
BUNDLE_VERSION = 1


class BundleError(Exception):
    pass


class BundleVersionError(BundleError):
    pass


class BundleCorruptError(BundleError):
    pass


@dataclass
class ModelBundle:
    portrait_size: int
    portrait_mode: str
    dataset_mean: np.ndarray          # (3,)
    feature_kind: str                 # "hsv" or "external:<name>"
    feature_dim: int
    pca: PcaModel | None
    classifier_kind: str              # "svm" | "bh" | "hsvthresh"
    classifier: object
    threshold: float
    saturation_reference: Histogram
    value_reference_mean: float
    provenance: dict = field(default_factory=dict)
    version: int = BUNDLE_VERSION

    def classifier_input_dim(self) -> int | None:
        return self.pca.k if self.pca is not None else self.feature_dim

    def validate(self) -> None:
        """Check the feature-dimension chain end to end."""
        if self.pca is not None and self.pca.input_dim != self.feature_dim:
            raise BundleError(f"PCA input dim {self.pca.input_dim} != feature dim {self.feature_dim}")
        expected = self.classifier_input_dim()
        if self.classifier_kind == "svm":
            if self.classifier.dim != expected:
                raise BundleError(f"SVM dim {self.classifier.dim} != expected {expected}")
        elif self.classifier_kind == "bh":
            if self.pca is not None:
                raise BundleError("Bhattacharyya classifier operates on raw histograms, not PCA output")
            if self.classifier.histograms.shape[1] != expected:
                raise BundleError(f"Bh histogram dim {self.classifier.histograms.shape[1]} "
                                  f"!= expected {expected}")
        elif self.classifier_kind == "hsvthresh":
            if not isinstance(self.classifier, HsvThresholdConfig):
                raise BundleError("hsvthresh bundle must carry an HsvThresholdConfig")
        else:
            raise BundleError(f"unknown classifier kind {self.classifier_kind!r}")


def _classifier_payload(kind, clf):
    if kind == "svm":
        return {
            "support_vectors": clf.support_vectors.tolist(),
            "dual_coef": clf.dual_coef.tolist(),
            "bias": clf.bias,
            "gamma": clf.gamma,
            "cost": clf.cost,
            "kernel": clf.kernel,
            "converged": clf.converged,
            "kkt_gap": clf.kkt_gap,
            "iterations": clf.iterations,
        }
    if kind == "bh":
        return {"histograms": clf.histograms.tolist(), "sigma": clf.sigma,
                "threshold": clf.threshold}
    if kind == "hsvthresh":
        return {"h_range": list(clf.h_range), "s_range": list(clf.s_range),
                "v_range": list(clf.v_range), "min_size": clf.min_size,
                "max_size": clf.max_size}
    raise BundleError(f"unknown classifier kind {kind!r}")


def _classifier_from_payload(kind, data):
    if kind == "svm":
        return SvmModel(
            support_vectors=np.asarray(data["support_vectors"], dtype=float),
            dual_coef=np.asarray(data["dual_coef"], dtype=float),
            bias=data["bias"], gamma=data["gamma"], cost=data["cost"],
            kernel=data["kernel"], converged=data["converged"],
            kkt_gap=data["kkt_gap"], iterations=data["iterations"],
        )
    if kind == "bh":
        return BhModel(np.asarray(data["histograms"], dtype=float),
                       data["sigma"], data["threshold"])
    if kind == "hsvthresh":
        return HsvThresholdConfig(tuple(data["h_range"]), tuple(data["s_range"]),
                                  tuple(data["v_range"]), data["min_size"], data["max_size"])
    raise BundleError(f"unknown classifier kind {kind!r}")


def _bundle_payload(b: ModelBundle) -> dict:
    return {
        "portrait_size": b.portrait_size,
        "portrait_mode": b.portrait_mode,
        "dataset_mean": np.asarray(b.dataset_mean, dtype=float).tolist(),
        "feature_kind": b.feature_kind,
        "feature_dim": b.feature_dim,
        "pca": None if b.pca is None else {
            "mean": b.pca.mean.tolist(),
            "components": b.pca.components.tolist(),
            "eigenvalues": b.pca.eigenvalues.tolist(),
            "k": b.pca.k,
            "degenerate": b.pca.degenerate,
        },
        "classifier_kind": b.classifier_kind,
        "classifier": _classifier_payload(b.classifier_kind, b.classifier),
        "threshold": b.threshold,
        "saturation_reference": {
            "bin_edges": b.saturation_reference.bin_edges.tolist(),
            "counts": b.saturation_reference.counts.tolist(),
            "normalized": b.saturation_reference.normalized,
        },
        "value_reference_mean": b.value_reference_mean,
        "provenance": b.provenance,
    }


def save_bundle(b: ModelBundle, path) -> None:
    b.validate()
    payload = _bundle_payload(b)
    body = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    digest = hashlib.sha256(body.encode("utf-8")).hexdigest()
    envelope = {"format": BUNDLE_FORMAT, "version": b.version, "sha256": digest,
                "payload": payload}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(envelope, fh, sort_keys=True, separators=(",", ":"))
        fh.write("\n")


def load_bundle(path) -> ModelBundle:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            envelope = json.load(fh)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise BundleCorruptError(f"{path}: unreadable bundle: {exc}") from None
    if not isinstance(envelope, dict) or envelope.get("format") != BUNDLE_FORMAT:
        raise BundleCorruptError(f"{path}: not a {BUNDLE_FORMAT} file")
    version = envelope.get("version")
    if version != BUNDLE_VERSION:
        raise BundleVersionError(
            f"{path}: bundle version {version} unsupported (this build reads version {BUNDLE_VERSION})"
        )
    payload = envelope.get("payload")
    body = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    digest = hashlib.sha256(body.encode("utf-8")).hexdigest()
    if digest != envelope.get("sha256"):
        raise BundleCorruptError(f"{path}: checksum mismatch, file is corrupt")

    pca = None
    if payload["pca"] is not None:
        p = payload["pca"]
        pca = PcaModel(np.asarray(p["mean"], dtype=float),
                       np.asarray(p["components"], dtype=float),
                       np.asarray(p["eigenvalues"], dtype=float),
                       p["k"], p["degenerate"])
    sat = payload["saturation_reference"]
    bundle = ModelBundle(
        portrait_size=payload["portrait_size"],
        portrait_mode=payload["portrait_mode"],
        dataset_mean=np.asarray(payload["dataset_mean"], dtype=float),
        feature_kind=payload["feature_kind"],
        feature_dim=payload["feature_dim"],
        pca=pca,
        classifier_kind=payload["classifier_kind"],
        classifier=_classifier_from_payload(payload["classifier_kind"], payload["classifier"]),
        threshold=payload["threshold"],
        saturation_reference=Histogram(np.asarray(sat["bin_edges"], dtype=float),
                                       np.asarray(sat["counts"], dtype=float),
                                       sat["normalized"]),
        value_reference_mean=payload["value_reference_mean"],
        provenance=payload["provenance"],
        version=version,
    )
    bundle.validate()
    return bundle


def bundles_equal(a: ModelBundle, b: ModelBundle) -> bool:
    """Exact field-by-field comparison."""
    return _bundle_payload(a) == _bundle_payload(b) and a.version == b.version
