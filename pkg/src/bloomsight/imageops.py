"""Pixel-level primitives: color conversion, histograms, entropy, Otsu,
connected components, histogram equalization/matching, channel shifts.

Image conventions used across the package:

* RGB images are float64 arrays of shape (H, W, 3) with channel values in
  [0, 255].
* HSV images are float64 arrays of shape (H, W, 3) with h in [0, 360),
  s and v in [0, 1].  When s == 0 the hue is canonicalized to 0.
* Binary masks are bool arrays of shape (H, W).
* Gray fields handed to entropy/equalization/matching are 2-D float arrays
  with values in [0, 1]; they are quantized to ``levels`` (default 256)
  before any histogram is taken.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

DEFAULT_LEVELS = 256


@dataclass
class Histogram:
    """Binned counts over contiguous, non-overlapping intervals."""

    bin_edges: np.ndarray
    counts: np.ndarray
    normalized: bool = False

    def __post_init__(self):
        self.bin_edges = np.asarray(self.bin_edges, dtype=float)
        self.counts = np.asarray(self.counts, dtype=float)
        if self.bin_edges.ndim != 1 or self.counts.ndim != 1:
            raise ValueError("bin_edges and counts must be 1-D")
        if len(self.bin_edges) != len(self.counts) + 1:
            raise ValueError("need len(bin_edges) == len(counts) + 1")
        if np.any(np.diff(self.bin_edges) <= 0):
            raise ValueError("bin edges must be strictly increasing")
        if np.any(self.counts < 0):
            raise ValueError("counts must be non-negative")
        if self.normalized and abs(self.counts.sum() - 1.0) > 1e-9:
            raise ValueError("normalized histogram must sum to 1 within 1e-9")

    @classmethod
    def from_values(cls, values, bins, lo, hi, normalized=False):
        values = np.asarray(values, dtype=float).ravel()
        edges = np.linspace(lo, hi, bins + 1)
        counts, _ = np.histogram(values, bins=edges)
        h = cls(edges, counts.astype(float))
        return h.normalize() if normalized else h

    @property
    def num_bins(self) -> int:
        return len(self.counts)

    def normalize(self) -> "Histogram":
        total = self.counts.sum()
        if total <= 0:
            raise ValueError("cannot normalize an empty histogram")
        return Histogram(self.bin_edges.copy(), self.counts / total, normalized=True)

    def cdf(self) -> np.ndarray:
        total = self.counts.sum()
        if total <= 0:
            raise ValueError("empty histogram has no CDF")
        return np.cumsum(self.counts) / total

    def bin_centers(self) -> np.ndarray:
        return 0.5 * (self.bin_edges[:-1] + self.bin_edges[1:])


def quantize(field, levels: int = DEFAULT_LEVELS) -> np.ndarray:
    """Map a [0, 1] real field to integer levels 0..levels-1."""
    q = np.floor(np.asarray(field, dtype=float) * levels).astype(np.int64)
    return np.clip(q, 0, levels - 1)


# ---------------------------------------------------------------------------
# color conversion


def rgb_to_hsv(img: np.ndarray) -> np.ndarray:
    """Hexcone RGB -> HSV.  h in degrees [0, 360); s, v in [0, 1]."""
    rgb = np.asarray(img, dtype=float) / 255.0
    r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    mx = rgb.max(axis=-1)
    mn = rgb.min(axis=-1)
    d = mx - mn
    v = mx
    s = np.where(mx > 0, d / np.where(mx > 0, mx, 1.0), 0.0)
    # channel priority r, g, b on ties
    with np.errstate(invalid="ignore", divide="ignore"):
        dd = np.where(d > 0, d, 1.0)
        hr = np.mod((g - b) / dd, 6.0)
        hg = (b - r) / dd + 2.0
        hb = (r - g) / dd + 4.0
    h = 60.0 * np.select([d == 0, mx == r, mx == g], [0.0, hr, hg], default=hb)
    h = np.mod(h, 360.0)
    h[s == 0] = 0.0
    return np.stack([h, s, v], axis=-1)


def hsv_to_rgb(img: np.ndarray) -> np.ndarray:
    """Inverse hexcone conversion; output channels in [0, 255]."""
    hsv = np.asarray(img, dtype=float)
    h, s, v = hsv[..., 0], hsv[..., 1], hsv[..., 2]
    c = v * s
    hp = (h % 360.0) / 60.0
    x = c * (1.0 - np.abs(np.mod(hp, 2.0) - 1.0))
    z = np.zeros_like(c)
    sector = np.floor(hp).astype(int) % 6
    r1 = np.choose(sector, [c, x, z, z, x, c])
    g1 = np.choose(sector, [x, c, c, x, z, z])
    b1 = np.choose(sector, [z, z, x, c, c, x])
    m = v - c
    return np.stack([r1 + m, g1 + m, b1 + m], axis=-1) * 255.0


_SRGB_TO_XYZ = np.array(
    [
        [0.4124564, 0.3575761, 0.1804375],
        [0.2126729, 0.7151522, 0.0721750],
        [0.0193339, 0.1191920, 0.9503041],
    ]
)
_D65_WHITE = np.array([0.95047, 1.0, 1.08883])


def rgb_to_lab(img: np.ndarray) -> np.ndarray:
    """sRGB (D65) -> CIELAB, channels in [0, 255] on input."""
    rgb = np.asarray(img, dtype=float) / 255.0
    lin = np.where(rgb <= 0.04045, rgb / 12.92, ((rgb + 0.055) / 1.055) ** 2.4)
    xyz = lin @ _SRGB_TO_XYZ.T
    t = xyz / _D65_WHITE
    delta = 6.0 / 29.0
    f = np.where(t > delta**3, np.cbrt(t), t / (3 * delta**2) + 4.0 / 29.0)
    fx, fy, fz = f[..., 0], f[..., 1], f[..., 2]
    lab = np.stack([116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)], axis=-1)
    return lab


def luminance(img: np.ndarray) -> np.ndarray:
    """Rec.601 luma of an RGB image, scaled to [0, 1]."""
    rgb = np.asarray(img, dtype=float)
    return (0.299 * rgb[..., 0] + 0.587 * rgb[..., 1] + 0.114 * rgb[..., 2]) / 255.0


# ---------------------------------------------------------------------------
# texture / thresholding


def local_entropy(gray, window: int, levels: int = DEFAULT_LEVELS) -> np.ndarray:
    """Shannon entropy (bits) of the quantized-level histogram of the
    window centered at each cell.  Borders use replicate padding.
    """
    if window < 1 or window % 2 == 0:
        raise ValueError(f"window must be odd and >= 1, got {window}")
    gray = np.asarray(gray, dtype=float)
    q = quantize(gray, levels)
    ent = np.zeros(gray.shape, dtype=float)
    for lvl in np.unique(q):
        p = ndimage.uniform_filter((q == lvl).astype(float), size=window, mode="nearest")
        pos = p > 1e-12
        ent[pos] -= p[pos] * np.log2(p[pos])
    return np.maximum(ent, 0.0)


def otsu_threshold(hist) -> int:
    """Threshold t maximizing inter-class variance between levels < t and
    levels >= t.  Ties broken by the lowest t.  Accepts a Histogram whose
    bins are the gray levels, or a raw counts array.
    """
    counts = hist.counts if isinstance(hist, Histogram) else np.asarray(hist, dtype=float)
    counts = counts.astype(float)
    if np.count_nonzero(counts) < 2:
        raise ValueError("otsu needs at least two non-empty levels")
    levels = np.arange(len(counts), dtype=float)
    total = counts.sum()
    w0 = np.cumsum(counts)[:-1]
    w1 = total - w0
    m0 = np.cumsum(counts * levels)[:-1]
    m1 = (counts * levels).sum() - m0
    valid = (w0 > 0) & (w1 > 0)
    var_between = np.full(len(counts) - 1, -np.inf)
    var_between[valid] = w0[valid] * w1[valid] * (m0[valid] / w0[valid] - m1[valid] / w1[valid]) ** 2
    return int(np.argmax(var_between)) + 1


# ---------------------------------------------------------------------------
# connected components


def _structure(connectivity: int) -> np.ndarray:
    if connectivity == 4:
        return ndimage.generate_binary_structure(2, 1)
    if connectivity == 8:
        return ndimage.generate_binary_structure(2, 2)
    raise ValueError(f"connectivity must be 4 or 8, got {connectivity}")


def connected_components(mask: np.ndarray, connectivity: int = 8):
    """Label true pixels into components.  Returns (labels, counts) where
    labels uses 0 for background and 1..n for components, and counts[i]
    is the pixel count of component i + 1.
    """
    mask = np.asarray(mask, dtype=bool)
    labels, n = ndimage.label(mask, structure=_structure(connectivity))
    counts = np.bincount(labels.ravel(), minlength=n + 1)[1:]
    return labels, counts


def filter_components_by_size(mask, min_px: int, max_px: int, connectivity: int = 8) -> np.ndarray:
    """Clear connected components whose pixel count lies outside
    [min_px, max_px] (inclusive bounds)."""
    if min_px > max_px:
        raise ValueError(f"min_px {min_px} > max_px {max_px}")
    mask = np.asarray(mask, dtype=bool)
    labels, counts = connected_components(mask, connectivity)
    if len(counts) == 0:
        return mask.copy()
    keep = (counts >= min_px) & (counts <= max_px)
    keep_table = np.concatenate([[False], keep])
    return keep_table[labels]


# ---------------------------------------------------------------------------
# histogram remaps


def equalization_map(values, levels: int = DEFAULT_LEVELS) -> np.ndarray:
    """Level -> [0, 1] remap table: the empirical CDF of the quantized values."""
    q = quantize(values, levels)
    counts = np.bincount(q.ravel(), minlength=levels)
    return np.cumsum(counts) / q.size


def equalize_histogram(channel, levels: int = DEFAULT_LEVELS) -> np.ndarray:
    """CDF-remap equalization of a [0, 1] field.  Monotone non-decreasing."""
    if levels < 2:
        raise ValueError("levels must be >= 2")
    channel = np.asarray(channel, dtype=float)
    remap = equalization_map(channel, levels)
    return remap[quantize(channel, levels)]


def matching_map(source_values, reference: Histogram, levels: int = DEFAULT_LEVELS) -> np.ndarray:
    """Level -> value table mapping each source level to the center of the
    first reference bin whose CDF reaches the source CDF at that level."""
    if not reference.normalized:
        raise ValueError("reference histogram must be normalized")
    if reference.num_bins < 2:
        raise ValueError("reference histogram needs at least 2 bins")
    src_cdf = equalization_map(source_values, levels)
    ref_cdf = reference.cdf()
    idx = np.searchsorted(ref_cdf, src_cdf - 1e-12, side="left")
    idx = np.clip(idx, 0, reference.num_bins - 1)
    return reference.bin_centers()[idx]


def match_histogram(source, reference: Histogram, levels: int = DEFAULT_LEVELS) -> np.ndarray:
    """Monotone CDF-to-CDF remap of a [0, 1] field onto a reference histogram."""
    source = np.asarray(source, dtype=float)
    remap = matching_map(source, reference, levels)
    return remap[quantize(source, levels)]


# ---------------------------------------------------------------------------
# channel statistics


def shift_value_channel(img: np.ndarray, target_mean: float) -> np.ndarray:
    """Shift the value channel so its mean hits target_mean, clamped to [0, 1]."""
    if not 0.0 <= target_mean <= 1.0:
        raise ValueError(f"target_mean must be in [0, 1], got {target_mean}")
    hsv = np.asarray(img, dtype=float).copy()
    v = hsv[..., 2]
    hsv[..., 2] = np.clip(v - (v.mean() - target_mean), 0.0, 1.0)
    return hsv


def mean_rgb(imgs) -> np.ndarray:
    """Pixel-weighted per-channel mean over a collection of RGB images."""
    imgs = list(imgs)
    if not imgs:
        raise ValueError("mean_rgb needs at least one image")
    total = np.zeros(3)
    pixels = 0
    for img in imgs:
        arr = np.asarray(img, dtype=float)
        total += arr.reshape(-1, 3).sum(axis=0)
        pixels += arr.shape[0] * arr.shape[1]
    return total / pixels


# ---------------------------------------------------------------------------
# resampling


def resize_bilinear(img: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Bilinear resize with half-pixel-aligned sampling.  Works on (H, W)
    and (H, W, C) float arrays; output preserves the input value range."""
    if out_h < 1 or out_w < 1:
        raise ValueError("output size must be positive")
    img = np.asarray(img, dtype=float)
    h, w = img.shape[:2]
    ys = np.clip((np.arange(out_h) + 0.5) * h / out_h - 0.5, 0, h - 1)
    xs = np.clip((np.arange(out_w) + 0.5) * w / out_w - 0.5, 0, w - 1)
    y0 = np.floor(ys).astype(int)
    x0 = np.floor(xs).astype(int)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    wy = (ys - y0).reshape(-1, 1)
    wx = (xs - x0).reshape(1, -1)
    if img.ndim == 3:
        wy = wy[..., None]
        wx = wx[..., None]
    top = img[y0][:, x0] * (1 - wx) + img[y0][:, x1] * wx
    bot = img[y1][:, x0] * (1 - wx) + img[y1][:, x1] * wx
    return top * (1 - wy) + bot * wy
