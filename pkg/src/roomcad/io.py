"""File formats: F32MAP float rasters and 8-bit RGB images (PNG, binary PPM).

F32MAP layout: the 6 ASCII bytes ``F32MAP``, then little-endian u32 width,
height and channel count, then ``width*height*channels`` little-endian f32
values, row-major with channels interleaved.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import RoomCadError

F32MAP_MAGIC = b"F32MAP"


class FormatError(RoomCadError):
    pass


def write_f32map(path, array) -> None:
    a = np.asarray(array, dtype="<f4")
    if a.ndim == 2:
        a = a[..., None]
    if a.ndim != 3:
        raise FormatError("bad-shape", f"expected (H, W[, C]), got {a.shape}")
    h, w, c = a.shape
    with open(path, "wb") as fh:
        fh.write(F32MAP_MAGIC + struct.pack("<III", w, h, c))
        fh.write(np.ascontiguousarray(a).tobytes())


def read_f32map(path) -> np.ndarray:
    """Returns a float64 array of shape (height, width, channels)."""
    data = Path(path).read_bytes()
    if len(data) < 18 or data[:6] != F32MAP_MAGIC:
        raise FormatError("bad-magic", f"{path} is not an F32MAP file")
    w, h, c = struct.unpack("<III", data[6:18])
    n = w * h * c
    if len(data) != 18 + 4 * n:
        raise FormatError("truncated", f"{path}: expected {n} values, found {(len(data) - 18) // 4}")
    return np.frombuffer(data, dtype="<f4", offset=18).reshape(h, w, c).astype(float)


def read_image(path) -> np.ndarray:
    """Load PNG or binary PPM (P6) as a uint8 (H, W, 3) array."""
    path = Path(path)
    try:
        with Image.open(path) as im:
            return np.asarray(im.convert("RGB"), dtype=np.uint8).copy()
    except (OSError, ValueError) as exc:
        raise FormatError("unreadable-image", f"{path}: {exc}") from exc


def write_image(path, rgb) -> None:
    """Write uint8 RGB; format chosen by suffix (``.ppm`` gives P6, else PNG)."""
    path = Path(path)
    im = Image.fromarray(np.asarray(rgb, dtype=np.uint8), "RGB")
    if path.suffix.lower() == ".ppm":
        im.save(path, format="PPM")
    else:
        # no timestamp or text chunks, so identical pixels give identical bytes
        im.save(path, format="PNG", optimize=False)


def to_gray(image) -> np.ndarray:
    img = np.asarray(image, dtype=float)
    if img.ndim == 3:
        img = img[..., :3] @ np.array([0.299, 0.587, 0.114])
    return img
