"""SLIC superpixel segmentation and ground-truth label assignment.

The segmentation is k-means-style clustering in (L, a, b, x, y) space with
the compactness-weighted distance

    D^2 = d_color^2 + (d_spatial / S)^2 * m^2,   S = sqrt(W * H / K).

Centers start on a regular grid, are perturbed to the lowest-gradient pixel
in their 3x3 neighborhood, and each center only competes for pixels inside
a 2S x 2S window.  Everything is deterministic: ties go to the
lowest-indexed center, and the per-center update loop is serial.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, asdict
from pathlib import Path

import numpy as np
from scipy import ndimage

from .imageops import rgb_to_lab, _structure

# sized so a 5184x3456 image yields ~915 superpixels
PIXELS_PER_SUPERPIXEL = 5184 * 3456 / 915


@dataclass(frozen=True)
class SlicConfig:
    target_count: int | None = None  # None: one superpixel per ~19.6k pixels
    compactness: float = 10.0
    max_iterations: int = 10
    convergence_epsilon: float = 0.0
    min_region_fraction: float = 0.25

    def __post_init__(self):
        if self.target_count is not None and self.target_count < 1:
            raise ValueError("target_count must be >= 1")
        if self.compactness <= 0:
            raise ValueError("compactness must be > 0")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.convergence_epsilon < 0:
            raise ValueError("convergence_epsilon must be >= 0")
        if not 0.0 < self.min_region_fraction < 1.0:
            raise ValueError("min_region_fraction must be in (0, 1)")

    def resolve_count(self, width: int, height: int) -> int:
        if self.target_count is not None:
            return self.target_count
        return max(1, int(np.ceil(width * height / PIXELS_PER_SUPERPIXEL)))


@dataclass
class SuperpixelLabeling:
    """Per-pixel superpixel assignment plus per-superpixel statistics."""

    ids: np.ndarray          # (H, W) int32, values in [0, k)
    k: int
    counts: np.ndarray       # (k,)
    centroids: np.ndarray    # (k, 2) mean (x, y)
    mean_colors: np.ndarray  # (k, 3) mean RGB

    @property
    def width(self) -> int:
        return self.ids.shape[1]

    @property
    def height(self) -> int:
        return self.ids.shape[0]

    @classmethod
    def from_ids(cls, ids: np.ndarray, img: np.ndarray | None = None) -> "SuperpixelLabeling":
        ids = np.asarray(ids, dtype=np.int32)
        k = int(ids.max()) + 1
        flat = ids.ravel()
        counts = np.bincount(flat, minlength=k).astype(np.int64)
        if np.any(counts == 0):
            raise ValueError("every superpixel id in [0, k) must be non-empty")
        h, w = ids.shape
        yy, xx = np.mgrid[0:h, 0:w]
        cx = np.bincount(flat, weights=xx.ravel(), minlength=k) / counts
        cy = np.bincount(flat, weights=yy.ravel(), minlength=k) / counts
        if img is not None:
            img = np.asarray(img, dtype=float)
            mean_colors = np.stack(
                [np.bincount(flat, weights=img[..., c].ravel(), minlength=k) / counts for c in range(3)],
                axis=1,
            )
        else:
            mean_colors = np.zeros((k, 3))
        return cls(ids, k, counts, np.stack([cx, cy], axis=1), mean_colors)


def _grid_shape(width: int, height: int, k: int) -> tuple[int, int]:
    ny = int(round(np.sqrt(k * height / width))) or 1
    nx = max(1, int(round(k / ny)))
    return nx, ny


def _initial_centers(lab: np.ndarray, nx: int, ny: int) -> np.ndarray:
    """Grid-seeded centers perturbed to the lowest-gradient 3x3 neighbor.
    Returns (n, 5) rows of (L, a, b, x, y)."""
    h, w = lab.shape[:2]
    right = lab[:, np.minimum(np.arange(w) + 1, w - 1), :]
    left = lab[:, np.maximum(np.arange(w) - 1, 0), :]
    down = lab[np.minimum(np.arange(h) + 1, h - 1), :, :]
    up = lab[np.maximum(np.arange(h) - 1, 0), :, :]
    grad = ((right - left) ** 2).sum(axis=-1) + ((down - up) ** 2).sum(axis=-1)

    centers = []
    for j in range(ny):
        for i in range(nx):
            x = min(int((i + 0.5) * w / nx), w - 1)
            y = min(int((j + 0.5) * h / ny), h - 1)
            y0, y1 = max(0, y - 1), min(h, y + 2)
            x0, x1 = max(0, x - 1), min(w, x + 2)
            win = grad[y0:y1, x0:x1]
            dy, dx = np.unravel_index(np.argmin(win), win.shape)
            py, px = y0 + dy, x0 + dx
            centers.append([lab[py, px, 0], lab[py, px, 1], lab[py, px, 2], float(px), float(py)])
    return np.array(centers)


def slic_segment(img: np.ndarray, cfg: SlicConfig = SlicConfig()) -> SuperpixelLabeling:
    """Segment an RGB image into superpixels."""
    img = np.asarray(img, dtype=float)
    h, w = img.shape[:2]
    k = cfg.resolve_count(w, h)
    if k > w * h:
        raise ValueError(f"target_count {k} exceeds pixel count {w * h}")

    lab = rgb_to_lab(img)
    s = np.sqrt(w * h / k)
    nx, ny = _grid_shape(w, h, k)
    centers = _initial_centers(lab, nx, ny)
    n = len(centers)
    ratio = (cfg.compactness / s) ** 2
    half = max(1, int(np.ceil(2 * s)))

    yy, xx = np.mgrid[0:h, 0:w].astype(float)
    ids = np.zeros((h, w), dtype=np.int32)
    for _ in range(cfg.max_iterations):
        dist = np.full((h, w), np.inf)
        ids.fill(-1)
        for ci in range(n):
            cl, ca, cb, cx, cy = centers[ci]
            x0, x1 = max(0, int(cx) - half), min(w, int(cx) + half + 1)
            y0, y1 = max(0, int(cy) - half), min(h, int(cy) + half + 1)
            sub = lab[y0:y1, x0:x1]
            d_color = (sub[..., 0] - cl) ** 2 + (sub[..., 1] - ca) ** 2 + (sub[..., 2] - cb) ** 2
            d_xy = (yy[y0:y1, x0:x1] - cy) ** 2 + (xx[y0:y1, x0:x1] - cx) ** 2
            d = d_color + d_xy * ratio
            better = d < dist[y0:y1, x0:x1]
            dist[y0:y1, x0:x1][better] = d[better]
            ids[y0:y1, x0:x1][better] = ci

        if np.any(ids < 0):  # pixels outside all windows: nearest center spatially
            miss = np.argwhere(ids < 0)
            d_sp = (miss[:, 0:1] - centers[None, :, 4]) ** 2 + (miss[:, 1:2] - centers[None, :, 3]) ** 2
            ids[miss[:, 0], miss[:, 1]] = np.argmin(d_sp, axis=1)

        flat = ids.ravel()
        sizes = np.bincount(flat, minlength=n).astype(float)
        occupied = sizes > 0
        new_centers = centers.copy()
        for dim, plane in enumerate(
            [lab[..., 0], lab[..., 1], lab[..., 2], xx, yy]
        ):
            sums = np.bincount(flat, weights=plane.ravel(), minlength=n)
            new_centers[occupied, dim] = sums[occupied] / sizes[occupied]

        movement = np.sqrt(((new_centers[:, 3:5] - centers[:, 3:5]) ** 2).sum(axis=1)).max()
        centers = new_centers
        if movement < cfg.convergence_epsilon:
            break

    ids = enforce_connectivity_ids(ids, k, cfg.min_region_fraction)
    return SuperpixelLabeling.from_ids(ids, img)


def enforce_connectivity_ids(ids: np.ndarray, k_target: int, min_region_fraction: float) -> np.ndarray:
    """Make every label a single connected region (4-connectivity).

    Disconnected fragments smaller than min_region_fraction * (W*H / k_target)
    are merged into the largest adjacent superpixel (tie: lowest id); larger
    fragments become new superpixels.  Ids are compacted to [0, k')."""
    ids = np.asarray(ids, dtype=np.int32).copy()
    h, w = ids.shape
    threshold = min_region_fraction * (h * w / k_target)
    structure = _structure(4)

    next_id = int(ids.max()) + 1
    small = []  # (size, first_flat_index, pixel_coords)
    for lab_id in range(next_id):
        mask = ids == lab_id
        if not mask.any():
            continue
        comp, n = ndimage.label(mask, structure=structure)
        if n <= 1:
            continue
        comp_sizes = np.bincount(comp.ravel())[1:]
        order = np.argsort(-comp_sizes, kind="stable")  # main region first
        for ci in order[1:]:
            pix = np.nonzero(comp == ci + 1)
            size = len(pix[0])
            if size >= threshold:
                ids[pix] = next_id
                next_id += 1
            else:
                small.append((size, int(pix[0][0] * w + pix[1][0]), pix))

    sizes = np.bincount(ids.ravel(), minlength=next_id).astype(np.int64)
    small.sort(key=lambda t: (t[0], t[1]))
    # merging through another unresolved fragment could leave the target id
    # disconnected, so a fragment only merges via already-resolved pixels;
    # anything walled in by pending fragments waits for the next pass
    pending_mask = np.zeros((h, w), dtype=bool)
    for _, _, pix in small:
        pending_mask[pix] = True
    pending = small
    while pending:
        deferred = []
        for size, first, pix in pending:
            ys, xs = pix
            neigh = set()
            for dy, dx in ((-1, 0), (1, 0), (0, -1), (0, 1)):
                ny_, nx_ = ys + dy, xs + dx
                ok = (ny_ >= 0) & (ny_ < h) & (nx_ >= 0) & (nx_ < w)
                ok[ok] = ~pending_mask[ny_[ok], nx_[ok]]
                neigh.update(np.unique(ids[ny_[ok], nx_[ok]]).tolist())
            if not neigh:
                deferred.append((size, first, pix))
                continue
            # own id can appear here only through earlier merges, in which
            # case those pixels are connected to its main region
            own = int(ids[ys[0], xs[0]])
            target = max(neigh, key=lambda nid: (sizes[nid], -nid))
            ids[ys, xs] = target
            pending_mask[ys, xs] = False
            sizes[target] += size
            sizes[own] -= size
        if len(deferred) == len(pending):
            break  # only possible if fragments tile the whole image
        pending = deferred

    used = np.unique(ids)
    remap = np.zeros(next_id, dtype=np.int32)
    remap[used] = np.arange(len(used), dtype=np.int32)
    return remap[ids]


def enforce_connectivity(lab: SuperpixelLabeling, min_region_fraction: float,
                         img: np.ndarray | None = None) -> SuperpixelLabeling:
    ids = enforce_connectivity_ids(lab.ids, lab.k, min_region_fraction)
    return SuperpixelLabeling.from_ids(ids, img)


def assign_labels_from_mask(lab: SuperpixelLabeling, flower_mask: np.ndarray,
                            area_fraction: float = 0.5) -> np.ndarray:
    """Boolean per-superpixel labels: positive iff the mask covers at least
    area_fraction of the superpixel."""
    flower_mask = np.asarray(flower_mask, dtype=bool)
    if flower_mask.shape != lab.ids.shape:
        raise ValueError(f"mask shape {flower_mask.shape} != labeling shape {lab.ids.shape}")
    if not 0.0 < area_fraction <= 1.0:
        raise ValueError("area_fraction must be in (0, 1]")
    covered = np.bincount(lab.ids[flower_mask], minlength=lab.k)
    return covered / lab.counts >= area_fraction


# ---------------------------------------------------------------------------
# serialization / caching

_MAGIC = b"SPXL1\n"


def save_labeling(path, lab: SuperpixelLabeling, config: SlicConfig | None = None) -> None:
    """Write the id raster (uint32 LE) plus a JSON sidecar with stats."""
    path = Path(path)
    header = _MAGIC + f"{lab.width} {lab.height} {lab.k}\n".encode("ascii")
    path.write_bytes(header + lab.ids.astype("<u4").tobytes())
    sidecar = {
        "k": lab.k,
        "config": asdict(config) if config is not None else None,
        "counts": lab.counts.tolist(),
        "centroids": lab.centroids.tolist(),
        "mean_colors": lab.mean_colors.tolist(),
    }
    path.with_suffix(path.suffix + ".json").write_text(json.dumps(sidecar, sort_keys=True))


def load_labeling(path) -> SuperpixelLabeling:
    path = Path(path)
    data = path.read_bytes()
    if not data.startswith(_MAGIC):
        raise ValueError(f"{path}: not a superpixel labeling file")
    nl = data.index(b"\n", len(_MAGIC))
    w, h, k = (int(t) for t in data[len(_MAGIC):nl].split())
    ids = np.frombuffer(data, dtype="<u4", count=w * h, offset=nl + 1).reshape(h, w)
    lab = SuperpixelLabeling.from_ids(ids.astype(np.int32))
    if lab.k != k:
        raise ValueError(f"{path}: header k={k} does not match raster ({lab.k})")
    sidecar = path.with_suffix(path.suffix + ".json")
    if sidecar.exists():
        stats = json.loads(sidecar.read_text())
        lab.mean_colors = np.asarray(stats["mean_colors"], dtype=float)
    return lab


def labeling_cache_key(img: np.ndarray, cfg: SlicConfig) -> str:
    digest = hashlib.sha256()
    digest.update(np.ascontiguousarray(np.asarray(img, dtype=float)).tobytes())
    digest.update(json.dumps(asdict(cfg), sort_keys=True).encode())
    return digest.hexdigest()
