"""Dataset manifests: JSON files listing images, flower masks, and splits.
All paths are manifest-relative for portability."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

SPLITS = ("train", "validation")


@dataclass
class ManifestEntry:
    image_id: str
    image: str  # path relative to the manifest
    mask: str
    split: str

    def __post_init__(self):
        if self.split not in SPLITS:
            raise ValueError(f"split must be one of {SPLITS}, got {self.split!r}")


@dataclass
class DatasetManifest:
    name: str
    entries: list
    mean_rgb: tuple | None = None
    slic_config_hash: str | None = None
    base_dir: Path = field(default_factory=Path)

    def split_entries(self, split: str) -> list:
        return [e for e in self.entries if e.split == split]

    def image_path(self, entry: ManifestEntry) -> Path:
        return self.base_dir / entry.image

    def mask_path(self, entry: ManifestEntry) -> Path:
        return self.base_dir / entry.mask


def load_manifest(path) -> DatasetManifest:
    path = Path(path)
    try:
        payload = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path}: not valid JSON: {exc}") from None
    entries = [ManifestEntry(e["image_id"], e["image"], e["mask"], e["split"])
               for e in payload.get("entries", [])]
    ids = [e.image_id for e in entries]
    if len(set(ids)) != len(ids):
        dupes = sorted({i for i in ids if ids.count(i) > 1})
        raise ValueError(f"{path}: duplicate image ids {dupes}")
    manifest = DatasetManifest(
        name=payload.get("name", path.stem),
        entries=entries,
        mean_rgb=tuple(payload["mean_rgb"]) if payload.get("mean_rgb") else None,
        slic_config_hash=payload.get("slic_config_hash"),
        base_dir=path.parent,
    )
    for entry in entries:
        for p in (manifest.image_path(entry), manifest.mask_path(entry)):
            if not p.exists():
                raise FileNotFoundError(f"{path}: referenced file missing: {p}")
    return manifest


def save_manifest(path, manifest: DatasetManifest) -> None:
    payload = {
        "name": manifest.name,
        "entries": [
            {"image_id": e.image_id, "image": e.image, "mask": e.mask, "split": e.split}
            for e in manifest.entries
        ],
        "mean_rgb": list(manifest.mean_rgb) if manifest.mean_rgb else None,
        "slic_config_hash": manifest.slic_config_hash,
    }
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True))
