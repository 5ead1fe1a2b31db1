"""Superpixel-based flower detection pipeline.

SLIC region proposals, portrait generation, HSV-histogram or external
feature vectors, PCA reduction, an SMO-trained RBF-SVM plus
Bhattacharyya-likelihood and HSV-threshold baselines, precision-recall
evaluation, and a transfer pre-processing chain for unseen datasets.
"""

from .bundle import (BundleCorruptError, BundleError, BundleVersionError,
                     ModelBundle, bundles_equal, load_bundle, save_bundle)
from .classify import (BhModel, GridSpec, HsvThresholdConfig, bh_distance,
                       bh_likelihood, bh_train, grid_search,
                       hsv_threshold_detect)
from .features import (ExternalFeatureSource, FeatureFormatError,
                       FeatureParseError, hsv_histogram_features,
                       hsv_histogram_features_all, load_external_features)
from .imageops import (Histogram, connected_components, equalize_histogram,
                       filter_components_by_size, hsv_to_rgb, local_entropy,
                       match_histogram, mean_rgb, otsu_threshold, rgb_to_hsv,
                       shift_value_channel)
from .manifest import DatasetManifest, ManifestEntry, load_manifest, save_manifest
from .metrics import (EvalReport, PrCurve, auc_pr, cross_validate, f1_optimal,
                      kfold_split, pr_curve)
from .pca import PcaModel, pca_fit, pca_project, variance_ratio
from .pipeline import (Detection, TrainConfig, TransferConfig, detect_image,
                       evaluate_bundle, find_background, train_pipeline,
                       transfer_preprocess)
from .portraits import (Portrait, augment_mirror, enclosing_square,
                        make_portrait, mean_center)
from .slic import (SlicConfig, SuperpixelLabeling, assign_labels_from_mask,
                   enforce_connectivity, slic_segment)
from .svm import SvmModel, svm_decision, svm_train
from .synth import SceneSpec, synth_dataset, synth_orchard

__version__ = "0.1.0"
