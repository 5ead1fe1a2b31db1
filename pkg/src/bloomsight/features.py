"""Feature extraction: the 100-bin HSV histogram of a superpixel, and
ingestion of externally computed feature vectors (e.g. CNN activations)
from CSV files.

External feature file contract (UTF-8 CSV):
  line 1:  #dim=<N>
  rows:    image_id,superpixel_id,v1,...,vN
Keys must be unique.  The superpixel_id field is either a plain integer or
<int>:<variant> with variant in {o, v, h, b} for mirror-augmented
portraits; a plain integer means variant 'o'.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .slic import SuperpixelLabeling

HSV_HIST_BINS = (50, 40, 10)  # hue over [0, 360), saturation and value over [0, 1]
HSV_HIST_DIM = sum(HSV_HIST_BINS)


class ExternalFeatureError(Exception):
    """Base error for external feature files."""


class FeatureFormatError(ExternalFeatureError):
    """Header/dimension contract violation."""


class FeatureParseError(ExternalFeatureError):
    def __init__(self, path, line_no, message):
        super().__init__(f"{path}:{line_no}: {message}")
        self.line_no = line_no


def _hsv_bin_indices(hsv_pixels: np.ndarray):
    hb, sb, vb = HSV_HIST_BINS
    h_idx = np.clip((hsv_pixels[:, 0] / 360.0 * hb).astype(int), 0, hb - 1)
    s_idx = np.clip((hsv_pixels[:, 1] * sb).astype(int), 0, sb - 1)
    v_idx = np.clip((hsv_pixels[:, 2] * vb).astype(int), 0, vb - 1)
    return h_idx, s_idx, v_idx


def _normalize_blocks(hist: np.ndarray, per_block: bool) -> np.ndarray:
    hb, sb, vb = HSV_HIST_BINS
    if per_block:
        for lo, width in ((0, hb), (hb, sb), (hb + sb, vb)):
            block = hist[..., lo : lo + width]
            total = block.sum(axis=-1, keepdims=True)
            np.divide(block, total, out=block, where=total > 0)
    total = hist.sum(axis=-1, keepdims=True)
    return hist / total


def hsv_histogram_features(img: np.ndarray, lab: SuperpixelLabeling, superpixel_id: int,
                           per_block: bool = True) -> np.ndarray:
    """100-dim HSV histogram of one superpixel: 50 hue + 40 saturation +
    10 value bins, each block L1-normalized, then the concatenation is
    renormalized to sum 1."""
    if not 0 <= superpixel_id < lab.k:
        raise ValueError(f"superpixel id {superpixel_id} out of range [0, {lab.k})")
    pixels = np.asarray(img, dtype=float)[lab.ids == superpixel_id]
    if len(pixels) == 0:
        raise ValueError(f"superpixel {superpixel_id} is empty; labeling invariant broken")
    hb, sb, vb = HSV_HIST_BINS
    h_idx, s_idx, v_idx = _hsv_bin_indices(pixels)
    hist = np.concatenate(
        [
            np.bincount(h_idx, minlength=hb).astype(float),
            np.bincount(s_idx, minlength=sb).astype(float),
            np.bincount(v_idx, minlength=vb).astype(float),
        ]
    )
    return _normalize_blocks(hist, per_block)


def hsv_histogram_features_all(img: np.ndarray, lab: SuperpixelLabeling,
                               per_block: bool = True) -> np.ndarray:
    """(k, 100) HSV histogram features for every superpixel at once."""
    hsv = np.asarray(img, dtype=float).reshape(-1, 3)
    ids = lab.ids.ravel()
    hb, sb, vb = HSV_HIST_BINS
    h_idx, s_idx, v_idx = _hsv_bin_indices(hsv)
    blocks = []
    for idx, width in ((h_idx, hb), (s_idx, sb), (v_idx, vb)):
        combined = np.bincount(ids * width + idx, minlength=lab.k * width).astype(float)
        blocks.append(combined.reshape(lab.k, width))
    return _normalize_blocks(np.concatenate(blocks, axis=1), per_block)


class ExternalFeatureSource:
    """Read-only lookup of externally computed feature vectors."""

    def __init__(self, name: str, dimension: int, table: dict):
        self.name = name
        self.dimension = dimension
        self._table = table

    def get(self, image_id: str, superpixel_id: int, variant: str = "o") -> np.ndarray:
        key = (str(image_id), int(superpixel_id), variant)
        if key not in self._table:
            raise KeyError(f"no feature vector for image {image_id!r}, "
                           f"superpixel {superpixel_id}, variant {variant!r}")
        return self._table[key]

    def has(self, image_id: str, superpixel_id: int, variant: str = "o") -> bool:
        return (str(image_id), int(superpixel_id), variant) in self._table

    def __len__(self) -> int:
        return len(self._table)


def load_external_features(path, expected_dim: int | None = None) -> ExternalFeatureSource:
    """Parse an external feature CSV; validates dimensions and key uniqueness."""
    path = Path(path)
    table = {}
    with path.open("r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if not header.startswith("#dim="):
            raise FeatureFormatError(f"{path}: first line must be '#dim=<N>', got {header!r}")
        try:
            dim = int(header[len("#dim="):])
        except ValueError:
            raise FeatureFormatError(f"{path}: bad dimension in header {header!r}") from None
        if expected_dim is not None and dim != expected_dim:
            raise FeatureFormatError(
                f"{path}: file dimension {dim} does not match expected {expected_dim}"
            )
        for line_no, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != dim + 2:
                raise FeatureParseError(path, line_no,
                                        f"expected {dim + 2} fields, got {len(parts)}")
            image_id, spx_field = parts[0], parts[1]
            variant = "o"
            if ":" in spx_field:
                spx_field, variant = spx_field.split(":", 1)
                if variant not in ("o", "v", "h", "b"):
                    raise FeatureParseError(path, line_no, f"bad variant {variant!r}")
            try:
                spx_id = int(spx_field)
                values = np.array([float(v) for v in parts[2:]])
            except ValueError as exc:
                raise FeatureParseError(path, line_no, str(exc)) from None
            key = (image_id, spx_id, variant)
            if key in table:
                raise FeatureParseError(path, line_no, f"duplicate key {key}")
            table[key] = values
    return ExternalFeatureSource(path.stem, dim, table)


def save_external_features(path, dimension: int, rows) -> None:
    """Write an external feature CSV.  rows: (image_id, superpixel_id, variant, vector)."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        fh.write(f"#dim={dimension}\n")
        for image_id, spx_id, variant, vec in rows:
            key = f"{spx_id}" if variant == "o" else f"{spx_id}:{variant}"
            fh.write(f"{image_id},{key}," + ",".join(repr(float(v)) for v in vec) + "\n")
