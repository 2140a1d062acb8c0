"""Image, frame-directory and label-map files."""
from __future__ import annotations

import re
from pathlib import Path

import numpy as np
from PIL import Image
from skimage.color import rgb2lab

from .metrics import label_boundaries

FRAME_SUFFIXES = (".ppm", ".pgm", ".pnm", ".png")


def read_image(path) -> np.ndarray:
    """Read a PPM/PGM (or any Pillow-readable) image as ``(H, W, 3)`` uint8 RGB."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"{path}: no such image")
    try:
        with Image.open(path) as im:
            return np.asarray(im.convert("RGB"))
    except Exception as exc:  # Pillow raises several types for bad headers
        raise ValueError(f"{path}: cannot read image ({exc})") from exc


def to_lab(rgb: np.ndarray) -> np.ndarray:
    """sRGB (uint8 or [0, 1] floats) to CIELAB under D65."""
    rgb = np.asarray(rgb)
    if rgb.dtype == np.uint8:
        rgb = rgb / 255.0
    return rgb2lab(rgb, illuminant="D65")


def _frame_key(p: Path):
    nums = re.findall(r"\d+", p.stem)
    return (int(nums[-1]) if nums else -1, p.name)


def list_frames(directory) -> list:
    directory = Path(directory)
    if not directory.is_dir():
        raise FileNotFoundError(f"{directory}: no such frame directory")
    frames = sorted((p for p in directory.iterdir() if p.suffix.lower() in FRAME_SUFFIXES),
                    key=_frame_key)
    if len(frames) < 2:
        raise ValueError(f"{directory}: need at least 2 frames, found {len(frames)}")
    return frames


def read_frames(directory) -> np.ndarray:
    """Numbered frames of a directory as a ``(T, H, W, 3)`` uint8 video."""
    frames = [read_image(p) for p in list_frames(directory)]
    shapes = {f.shape for f in frames}
    if len(shapes) != 1:
        raise ValueError(f"{directory}: frames differ in size {sorted(shapes)}")
    return np.stack(frames)


def write_pgm16(path, labels: np.ndarray):
    """Binary 16-bit PGM (maxval 65535, big endian)."""
    labels = np.asarray(labels)
    if labels.ndim != 2:
        raise ValueError("a PGM holds one 2-D label map")
    if labels.size and (labels.min() < 0 or labels.max() > 65535):
        raise ValueError("labels must lie in [0, 65535]")
    h, w = labels.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n65535\n".encode("ascii"))
        fh.write(labels.astype(">u2").tobytes())


def read_pgm16(path) -> np.ndarray:
    data = Path(path).read_bytes()
    tokens = []
    pos = 0
    while len(tokens) < 4:
        m = re.compile(rb"\s*(#[^\n]*\n\s*)*(\S+)").match(data, pos)
        if m is None:
            raise ValueError(f"{path}: truncated PGM header")
        tokens.append(m.group(2))
        pos = m.end()
    magic, w, h, maxval = tokens[0], int(tokens[1]), int(tokens[2]), int(tokens[3])
    if magic != b"P5":
        raise ValueError(f"{path}: not a binary PGM")
    dtype = ">u2" if maxval > 255 else "u1"
    body = data[pos + 1:]
    return np.frombuffer(body, dtype=dtype, count=w * h).reshape(h, w).astype(np.int64)


def write_ppm(path, rgb: np.ndarray):
    """Binary PPM (maxval 255)."""
    rgb = np.asarray(rgb, dtype=np.uint8)
    h, w = rgb.shape[:2]
    with open(path, "wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        fh.write(np.ascontiguousarray(rgb[..., :3]).tobytes())


def boundary_overlay(rgb: np.ndarray, labels: np.ndarray, color=(255, 0, 0)) -> np.ndarray:
    """Copy of ``rgb`` with region boundaries painted in ``color``."""
    out = np.array(rgb, dtype=np.uint8, copy=True)
    out[label_boundaries(labels)] = color
    return out
