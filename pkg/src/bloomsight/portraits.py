"""Portrait generation: crop the smallest square around a superpixel, treat
the background (keep / blur / mean-pad), resize to the classifier input
size, and mean-center.  Positive samples are mirror-augmented 4x.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

from .imageops import resize_bilinear
from .imgio import write_image_rgb
from .slic import SuperpixelLabeling

PORTRAIT_SIZE = 227
PORTRAIT_MODES = ("original", "blur", "mean_pad")
MIRROR_VARIANTS = ("o", "v", "h", "b")  # identity, vertical-axis, horizontal-axis, both


@dataclass(frozen=True)
class SquareRect:
    x0: int
    y0: int
    side: int
    out_of_image: bool


@dataclass
class Portrait:
    pixels: np.ndarray  # (size, size, 3) float
    image_id: str
    superpixel_id: int
    mode: str
    centered: bool = False
    variant: str = "o"

    @property
    def size(self) -> int:
        return self.pixels.shape[0]


def enclosing_square(lab: SuperpixelLabeling, superpixel_id: int) -> SquareRect:
    """Smallest square containing the superpixel's bounding box, centered on
    that box; may extend past the image borders."""
    if not 0 <= superpixel_id < lab.k:
        raise ValueError(f"superpixel id {superpixel_id} out of range [0, {lab.k})")
    ys, xs = np.nonzero(lab.ids == superpixel_id)
    r0, r1 = int(ys.min()), int(ys.max())
    c0, c1 = int(xs.min()), int(xs.max())
    bh, bw = r1 - r0 + 1, c1 - c0 + 1
    side = max(bh, bw)
    y0 = r0 - (side - bh) // 2
    x0 = c0 - (side - bw) // 2
    outside = y0 < 0 or x0 < 0 or y0 + side > lab.height or x0 + side > lab.width
    return SquareRect(x0, y0, side, outside)


def make_portrait(img: np.ndarray, lab: SuperpixelLabeling, superpixel_id: int,
                  mode: str, mean: np.ndarray, size: int = PORTRAIT_SIZE,
                  image_id: str = "", blur_sigma: float = 8.0) -> Portrait:
    """Crop, background-treat, and resize one superpixel's portrait.

    Out-of-image area is always filled with the dataset mean.  The result is
    not yet mean-centered.
    """
    if mode not in PORTRAIT_MODES:
        raise ValueError(f"mode must be one of {PORTRAIT_MODES}, got {mode!r}")
    if size < 1:
        raise ValueError("size must be >= 1")
    img = np.asarray(img, dtype=float)
    mean = np.asarray(mean, dtype=float)
    rect = enclosing_square(lab, superpixel_id)

    crop = np.empty((rect.side, rect.side, 3))
    crop[:] = mean
    inside = np.zeros((rect.side, rect.side), dtype=bool)
    y0, y1 = max(0, rect.y0), min(lab.height, rect.y0 + rect.side)
    x0, x1 = max(0, rect.x0), min(lab.width, rect.x0 + rect.side)
    cy0, cx0 = y0 - rect.y0, x0 - rect.x0
    crop[cy0 : cy0 + (y1 - y0), cx0 : cx0 + (x1 - x0)] = img[y0:y1, x0:x1]
    inside[cy0 : cy0 + (y1 - y0), cx0 : cx0 + (x1 - x0)] = (
        lab.ids[y0:y1, x0:x1] == superpixel_id
    )

    if mode == "mean_pad":
        crop = np.where(inside[..., None], crop, mean)
    elif mode == "blur":
        blurred = np.stack(
            [ndimage.gaussian_filter(crop[..., c], sigma=blur_sigma, mode="nearest") for c in range(3)],
            axis=-1,
        )
        crop = np.where(inside[..., None], crop, blurred)

    resized = resize_bilinear(crop, size, size)
    return Portrait(resized, image_id, superpixel_id, mode)


def mean_center(p: Portrait, mean: np.ndarray) -> Portrait:
    """Subtract the dataset mean per channel.  Refuses to center twice."""
    if p.centered:
        raise ValueError("portrait is already mean-centered")
    pixels = p.pixels - np.asarray(mean, dtype=float)
    return Portrait(pixels, p.image_id, p.superpixel_id, p.mode, centered=True, variant=p.variant)


def mirror_portrait(p: Portrait, variant: str) -> Portrait:
    """Flip a portrait: 'o' identity, 'v' vertical-axis (left-right),
    'h' horizontal-axis (top-bottom), 'b' both."""
    if variant not in MIRROR_VARIANTS:
        raise ValueError(f"variant must be one of {MIRROR_VARIANTS}, got {variant!r}")
    pixels = p.pixels
    if variant in ("v", "b"):
        pixels = pixels[:, ::-1]
    if variant in ("h", "b"):
        pixels = pixels[::-1, :]
    return Portrait(np.ascontiguousarray(pixels), p.image_id, p.superpixel_id,
                    p.mode, centered=p.centered, variant=variant)


def augment_mirror(samples):
    """Quadruple positive samples by mirroring; negatives pass through.

    samples: iterable of (Portrait, label) with label +1 / -1.
    """
    out = []
    for portrait, label in samples:
        if label > 0:
            for variant in MIRROR_VARIANTS:
                out.append((mirror_portrait(portrait, variant), label))
        else:
            out.append((portrait, label))
    return out


def export_portraits(portraits, labels, out_dir) -> Path:
    """Write portraits as PNGs plus an index CSV
    (image_id, superpixel_id, label, path)."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    index = out_dir / "index.csv"
    with index.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["image_id", "superpixel_id", "label", "path"])
        for portrait, label in zip(portraits, labels):
            name = f"{portrait.image_id}_{portrait.superpixel_id}_{portrait.variant}.png"
            write_image_rgb(out_dir / name, portrait.pixels)
            writer.writerow([portrait.image_id, portrait.superpixel_id, int(label), name])
    return index
