"""Image file IO: 8-bit RGB PNG images and PGM (P5) binary masks."""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image


def read_image_rgb(path) -> np.ndarray:
    """Read an image file as a float64 (H, W, 3) array in [0, 255]."""
    with Image.open(path) as im:
        rgb = im.convert("RGB")
        return np.asarray(rgb, dtype=float)


def write_image_rgb(path, img: np.ndarray) -> None:
    arr = np.clip(np.rint(np.asarray(img, dtype=float)), 0, 255).astype(np.uint8)
    Image.fromarray(arr, mode="RGB").save(Path(path), format="PNG")


def read_mask_pgm(path) -> np.ndarray:
    """Read a P5 PGM mask; pixels > 127 are foreground."""
    data = Path(path).read_bytes()
    if not data.startswith(b"P5"):
        raise ValueError(f"{path}: not a binary PGM (P5) file")
    # header = magic, width, height, maxval as whitespace-separated tokens,
    # with optional '#' comment lines
    tokens = []
    pos = 2
    while len(tokens) < 3:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos : pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        tokens.append(data[start:pos])
    pos += 1  # single whitespace after maxval
    width, height, maxval = (int(t) for t in tokens)
    if maxval > 255:
        raise ValueError(f"{path}: 16-bit PGM not supported")
    raster = np.frombuffer(data, dtype=np.uint8, count=width * height, offset=pos)
    return raster.reshape(height, width) > 127


def write_mask_pgm(path, mask: np.ndarray) -> None:
    """Write a bool mask as P5 PGM with 0 = background, 255 = foreground."""
    mask = np.asarray(mask, dtype=bool)
    h, w = mask.shape
    header = f"P5\n{w} {h}\n255\n".encode("ascii")
    Path(path).write_bytes(header + (mask.astype(np.uint8) * 255).tobytes())
