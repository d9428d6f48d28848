"""Image and raw-tensor file output.

Images are real-valued in [-1, 1] and mapped affinely to 8-bit for PNG
export. The raw float dump format is:

    magic  4 bytes  b"SAFL"
    u32    version (1)
    u32    dtype code: 4 = float32, 8 = float64
    u32    ndim
    u32*   dims
    data   row-major little-endian floats

All integers little-endian.
"""

import struct

import numpy as np
from PIL import Image

from .substrate import Tensor

RAW_MAGIC = b"SAFL"
RAW_VERSION = 1


def _as_array(x):
    return x.numpy() if isinstance(x, Tensor) else np.asarray(x)


def to_uint8(img):
    """Clamp [-1, 1] floats to 8-bit gray/RGB."""
    arr = _as_array(img)
    return (np.clip(arr, -1.0, 1.0) * 127.5 + 127.5).round().astype(np.uint8)


def save_png(img, path):
    arr = _as_array(img)
    if arr.dtype != np.uint8:
        arr = to_uint8(arr)
    if arr.ndim == 3 and arr.shape[2] == 1:
        arr = arr[:, :, 0]
    Image.fromarray(arr).save(path, format="PNG")


def heatmap_png(values, path):
    """Nonnegative 2-D map rendered as max-normalized grayscale."""
    arr = _as_array(values).astype(np.float64)
    peak = arr.max()
    if peak > 0:
        arr = arr / peak
    Image.fromarray((arr * 255.0).round().astype(np.uint8)).save(path, format="PNG")


def image_grid(images, rows, cols, pad=2):
    """Tile equally sized HxWx3 uint8 images into one array; missing cells black."""
    h, w = next(img for img in images if img is not None).shape[:2]
    grid = np.zeros((rows * (h + pad) - pad, cols * (w + pad) - pad, 3), dtype=np.uint8)
    for idx, img in enumerate(images):
        if img is None:
            continue
        r, c = divmod(idx, cols)
        grid[r * (h + pad) : r * (h + pad) + h, c * (w + pad) : c * (w + pad) + w] = img
    return grid


_DTYPE_CODES = {4: np.dtype("<f4"), 8: np.dtype("<f8")}


def save_raw(arr, path):
    arr = _as_array(arr)
    code = 4 if arr.dtype == np.float32 else 8
    dt = _DTYPE_CODES[code]
    with open(path, "wb") as f:
        f.write(RAW_MAGIC)
        f.write(struct.pack("<III", RAW_VERSION, code, arr.ndim))
        f.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
        f.write(np.ascontiguousarray(arr, dtype=dt).tobytes())


def load_raw(path):
    with open(path, "rb") as f:
        if f.read(4) != RAW_MAGIC:
            raise ValueError(f"{path}: not a raw tensor dump")
        version, code, ndim = struct.unpack("<III", f.read(12))
        if version != RAW_VERSION:
            raise ValueError(f"{path}: unsupported version {version}")
        shape = struct.unpack(f"<{ndim}I", f.read(4 * ndim))
        data = np.frombuffer(f.read(), dtype=_DTYPE_CODES[code])
    return data.reshape(shape).copy()
