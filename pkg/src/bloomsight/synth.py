"""Synthetic orchard scenes with ground-truth flower masks.

Scenes are deterministic functions of (spec, seed): white-to-pink discs
(flowers) over a green textured background with brown branch strokes, an
optional flat panel region, and a per-scene illumination factor.  Discs are
placed without overlap, fully inside the image, and outside the panel, so
the mask's pixel count tracks the analytic disc area.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, asdict, field
from pathlib import Path

import numpy as np
from scipy import ndimage

from .imgio import write_image_rgb, write_mask_pgm
from .manifest import DatasetManifest, ManifestEntry, save_manifest


@dataclass(frozen=True)
class SceneSpec:
    width: int = 96
    height: int = 96
    disc_count: int = 6
    radius_range: tuple = (5, 10)
    background_rgb: tuple = (58, 110, 52)
    clutter: float = 0.5              # 0..1, scales texture noise and branch count
    illumination_range: tuple = (0.8, 1.1)
    branch_count: int = 3
    branch_width: float = 1.5
    panel: tuple | None = None        # (x0, y0, w, h) as fractions of the image
    panel_rgb: tuple = (70, 90, 200)

    @classmethod
    def from_json(cls, path) -> "SceneSpec":
        data = json.loads(Path(path).read_text())
        known = {f: data[f] for f in data if f in cls.__dataclass_fields__}
        for key in ("radius_range", "illumination_range", "background_rgb",
                    "panel_rgb", "panel"):
            if known.get(key) is not None:
                known[key] = tuple(known[key])
        return cls(**known)


@dataclass
class SceneLayout:
    discs: list          # (cx, cy, r, tint) with tint in [0, 1] toward pink
    branches: list       # (x0, y0, x1, y1)
    illumination: float
    panel_rect: tuple | None  # (x0, y0, x1, y1) pixel bounds, half-open


def panel_rect_pixels(spec: SceneSpec) -> tuple | None:
    if spec.panel is None:
        return None
    fx, fy, fw, fh = spec.panel
    x0, y0 = int(fx * spec.width), int(fy * spec.height)
    x1 = min(spec.width, x0 + int(fw * spec.width))
    y1 = min(spec.height, y0 + int(fh * spec.height))
    return (x0, y0, x1, y1)


def scene_layout(spec: SceneSpec, seed: int) -> SceneLayout:
    """Sample the deterministic layout for a scene."""
    rng = np.random.default_rng(np.random.SeedSequence([seed]))
    w, h = spec.width, spec.height
    panel = panel_rect_pixels(spec)
    illum = float(rng.uniform(*spec.illumination_range))

    branches = []
    n_branches = int(round(spec.branch_count * (0.5 + spec.clutter)))
    for _ in range(n_branches):
        x0, y0 = rng.uniform(0, w), rng.uniform(0, h)
        angle = rng.uniform(0, 2 * np.pi)
        length = rng.uniform(0.3, 0.8) * min(w, h)
        branches.append((x0, y0, x0 + length * np.cos(angle), y0 + length * np.sin(angle)))

    discs = []
    attempts = 0
    while len(discs) < spec.disc_count and attempts < spec.disc_count * 200:
        attempts += 1
        r = int(rng.integers(spec.radius_range[0], spec.radius_range[1] + 1))
        cx = float(rng.uniform(r + 1, w - r - 1))
        cy = float(rng.uniform(r + 1, h - r - 1))
        if panel is not None:
            px0, py0, px1, py1 = panel
            if px0 - r <= cx <= px1 + r and py0 - r <= cy <= py1 + r:
                continue
        if any((cx - ox) ** 2 + (cy - oy) ** 2 < (r + orad + 1) ** 2
               for ox, oy, orad, _ in discs):
            continue
        discs.append((cx, cy, r, float(rng.uniform(0, 1))))
    return SceneLayout(discs, branches, illum, panel)


def _segment_distance(xx, yy, x0, y0, x1, y1):
    dx, dy = x1 - x0, y1 - y0
    denom = dx * dx + dy * dy
    if denom == 0:
        return np.hypot(xx - x0, yy - y0)
    t = np.clip(((xx - x0) * dx + (yy - y0) * dy) / denom, 0.0, 1.0)
    return np.hypot(xx - (x0 + t * dx), yy - (y0 + t * dy))


def synth_orchard(spec: SceneSpec, seed: int):
    """Render one scene.  Returns (image, flower_mask)."""
    layout = scene_layout(spec, seed)
    rng = np.random.default_rng(np.random.SeedSequence([seed, 1]))
    w, h = spec.width, spec.height
    yy, xx = np.mgrid[0:h, 0:w].astype(float)

    img = np.empty((h, w, 3))
    img[:] = np.asarray(spec.background_rgb, dtype=float)
    fine = rng.normal(0.0, 1.0, (h, w, 3)) * (6.0 + 22.0 * spec.clutter)
    coarse = ndimage.gaussian_filter(rng.normal(0.0, 1.0, (h, w)), sigma=6.0) * 55.0 * spec.clutter
    img += fine + coarse[..., None]

    brown = np.array([92.0, 64.0, 40.0])
    for x0, y0, x1, y1 in layout.branches:
        d = _segment_distance(xx, yy, x0, y0, x1, y1)
        on = d <= spec.branch_width
        img[on] = brown + rng.normal(0.0, 6.0, (int(on.sum()), 3))

    if layout.panel_rect is not None:
        px0, py0, px1, py1 = layout.panel_rect
        img[py0:py1, px0:px1] = np.asarray(spec.panel_rgb, dtype=float)

    mask = np.zeros((h, w), dtype=bool)
    for cx, cy, r, tint in layout.discs:
        disc = (xx - cx) ** 2 + (yy - cy) ** 2 <= r * r
        color = np.array([250.0, 250.0 - 52.0 * tint, 250.0 - 28.0 * tint])
        img[disc] = color + rng.normal(0.0, 3.0, (int(disc.sum()), 3))
        mask |= disc

    img *= layout.illumination
    return np.clip(img, 0.0, 255.0), mask


def synth_dataset(out_dir, spec: SceneSpec, count: int, seed: int,
                  val_count: int = 0, name: str = "synth") -> Path:
    """Generate a dataset: PNG images, PGM masks, and a manifest.  The last
    val_count images form the validation split."""
    if val_count > count:
        raise ValueError("val_count cannot exceed count")
    out_dir = Path(out_dir)
    (out_dir / "images").mkdir(parents=True, exist_ok=True)
    (out_dir / "masks").mkdir(parents=True, exist_ok=True)
    entries = []
    for i in range(count):
        child_seed = int(np.random.SeedSequence([seed, i]).generate_state(1)[0])
        img, mask = synth_orchard(spec, child_seed)
        image_id = f"{name}_{i:04d}"
        write_image_rgb(out_dir / "images" / f"{image_id}.png", img)
        write_mask_pgm(out_dir / "masks" / f"{image_id}.pgm", mask)
        split = "validation" if i >= count - val_count else "train"
        entries.append(ManifestEntry(image_id, f"images/{image_id}.png",
                                     f"masks/{image_id}.pgm", split))
    manifest_path = out_dir / "manifest.json"
    save_manifest(manifest_path, DatasetManifest(name, entries))
    (out_dir / "scene_spec.json").write_text(json.dumps(asdict(spec), sort_keys=True, indent=2))
    return manifest_path
