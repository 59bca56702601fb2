"""Image loading and saving: PNG via Pillow, PGM (binary P5 and ASCII P2) parsed directly.

Loaded intensities are scaled to [0, 1]; color is kept as a float (H, W, 3)
array where available, with grayscale derived via Rec. 601 luma.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image as PilImage

from .errors import LoadError
from .image import IntensityImage

LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114])


def rgb_to_luma(rgb: np.ndarray) -> np.ndarray:
    return np.clip(rgb @ LUMA_WEIGHTS, 0.0, 1.0)


def _pgm_tokens(data: bytes):
    """Yield header tokens, skipping whitespace and '#' comments."""
    i = 0
    n = len(data)
    while i < n:
        c = data[i : i + 1]
        if c.isspace():
            i += 1
        elif c == b"#":
            while i < n and data[i : i + 1] != b"\n":
                i += 1
        else:
            j = i
            while j < n and not data[j : j + 1].isspace():
                j += 1
            yield data[i:j], j
            i = j


def load_pgm(path) -> np.ndarray:
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise LoadError(f"cannot read {path}: {exc}") from exc
    tokens = _pgm_tokens(data)
    try:
        magic, _ = next(tokens)
        if magic not in (b"P2", b"P5"):
            raise LoadError(f"{path}: not a PGM file (magic {magic!r})")
        width, _ = next(tokens)
        height, _ = next(tokens)
        maxval, end = next(tokens)
        width, height, maxval = int(width), int(height), int(maxval)
    except (StopIteration, ValueError) as exc:
        raise LoadError(f"{path}: malformed PGM header") from exc
    if width <= 0 or height <= 0 or not 0 < maxval < 65536:
        raise LoadError(f"{path}: invalid PGM dimensions or maxval")
    count = width * height
    if magic == b"P2":
        try:
            values = np.array(data[end:].decode("ascii").split(), dtype=np.float64)
        except (UnicodeDecodeError, ValueError) as exc:
            raise LoadError(f"{path}: malformed P2 data") from exc
        if values.size != count:
            raise LoadError(f"{path}: expected {count} samples, found {values.size}")
    else:
        dtype = np.dtype(">u2") if maxval > 255 else np.dtype(np.uint8)
        raw = data[end + 1 :]
        needed = count * dtype.itemsize
        if len(raw) < needed:
            raise LoadError(f"{path}: truncated P5 data")
        values = np.frombuffer(raw[:needed], dtype=dtype).astype(np.float64)
    return np.clip(values.reshape(height, width) / maxval, 0.0, 1.0)


def save_pgm(path, array: np.ndarray) -> None:
    arr = np.clip(np.asarray(array, dtype=np.float64), 0.0, 1.0)
    data = np.round(arr * 255.0).astype(np.uint8)
    header = f"P5\n{arr.shape[1]} {arr.shape[0]}\n255\n".encode("ascii")
    Path(path).write_bytes(header + data.tobytes())


def load_png(path) -> np.ndarray:
    """Returns float array in [0, 1]: (H, W) for grayscale, (H, W, 3) for color."""
    path = Path(path)
    try:
        with PilImage.open(path) as img:
            if img.mode in ("L", "I;16", "I"):
                arr = np.asarray(img.convert("L"), dtype=np.float64) / 255.0
            else:
                arr = np.asarray(img.convert("RGB"), dtype=np.float64) / 255.0
    except OSError as exc:
        raise LoadError(f"cannot read {path}: {exc}") from exc
    return arr


def save_png(path, array: np.ndarray) -> None:
    arr = np.clip(np.asarray(array, dtype=np.float64), 0.0, 1.0)
    data = np.round(arr * 255.0).astype(np.uint8)
    mode = "L" if data.ndim == 2 else "RGB"
    PilImage.fromarray(data, mode=mode).save(Path(path))


def load_image(path) -> tuple[IntensityImage, np.ndarray | None]:
    """Load a PNG or PGM frame; returns (grayscale image, color array or None)."""
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix == ".pgm":
        return IntensityImage(load_pgm(path)), None
    if suffix == ".png":
        arr = load_png(path)
        if arr.ndim == 2:
            return IntensityImage(arr), None
        return IntensityImage(rgb_to_luma(arr)), arr
    raise LoadError(f"unsupported image format: {path}")
