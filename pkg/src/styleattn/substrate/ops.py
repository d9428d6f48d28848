"""Named numeric operations used across the generator and the harness.

Everything here is a thin composition of the autodiff primitives in
``tensor``; the contracts (epsilons, flattening order, boundary handling)
are fixed package-wide:

* layer normalization is per pixel across the channel axis, eps = 1e-5
* flattening is row-major over the H x H grid (pixel p = y*H + x)
* bilinear upsampling uses half-pixel centers (align-corners-false), which
  preserves constants exactly
"""

import numpy as np

from .tensor import Tensor, leaky_relu, matmul, reshape, softmax_rows, transpose, tsum

LAYERNORM_EPS = 1e-5

_upsample_cache = {}


def layer_norm(x, gain=None, bias=None, eps=LAYERNORM_EPS):
    """Normalize each pixel (row) to zero mean / unit variance across channels.

    x: (n, C) sheet with C >= 2; gain/bias are per-channel (C,) or None.
    """
    if x.ndim != 2:
        raise ValueError(f"layer_norm expects a 2-D sheet, got {x.shape}")
    n, c = x.shape
    if c < 2:
        raise ValueError(f"layer_norm needs at least 2 channels, got {c}")
    mu = x.mean(axis=1, keepdims=True)
    centered = x - mu
    var = centered.square().mean(axis=1, keepdims=True)
    normed = centered * (var + eps) ** -0.5
    if gain is not None:
        normed = normed * gain
    if bias is not None:
        normed = normed + bias
    return normed


def upsample_matrix(h, dtype=np.float64):
    """(2h, h) bilinear interpolation matrix with half-pixel centers."""
    key = (h, np.dtype(dtype))
    if key not in _upsample_cache:
        u = np.zeros((2 * h, h), dtype=dtype)
        for i in range(2 * h):
            src = np.clip((i + 0.5) / 2.0 - 0.5, 0.0, h - 1.0)
            lo = int(np.floor(src))
            hi = min(lo + 1, h - 1)
            t = src - lo
            u[i, lo] += 1.0 - t
            u[i, hi] += t
        _upsample_cache[key] = u
    return _upsample_cache[key]


def bilinear_upsample_2x(x):
    """Upsample an (H, H, C) grid to (2H, 2H, C)."""
    if x.ndim != 3 or x.shape[0] != x.shape[1]:
        raise ValueError(f"bilinear_upsample_2x expects a square (H, H, C) grid, got {x.shape}")
    h, _, c = x.shape
    u = Tensor(upsample_matrix(h, x.dtype))
    rows = reshape(matmul(u, reshape(x, (h, h * c))), (2 * h, h, c))
    cols = reshape(transpose(rows, (1, 0, 2)), (h, 2 * h * c))
    out = reshape(matmul(u, cols), (2 * h, 2 * h, c))
    return transpose(out, (1, 0, 2))


def svd_singular_values(m):
    """Singular values of a 2-D matrix, descending. Returns a numpy vector."""
    arr = m.data if isinstance(m, Tensor) else np.asarray(m)
    if arr.ndim != 2:
        raise ValueError(f"expected a matrix, got shape {arr.shape}")
    if not np.isfinite(arr).all():
        raise ValueError("svd_singular_values: non-finite input")
    return np.linalg.svd(arr, compute_uv=False)


def flatten_grid(x):
    """(H, W, C) grid -> (H*W, C) sheet, row-major."""
    h, w, c = x.shape
    return reshape(x, (h * w, c))


def unflatten_sheet(x, h):
    """(h*h, C) sheet -> (h, h, C) grid; inverse of flatten_grid."""
    n, c = x.shape
    if n != h * h:
        raise ValueError(f"cannot unflatten {n} pixels to {h}x{h}")
    return reshape(x, (h, h, c))


def rss_columns(w, floor=0.0):
    """Per-column root-sum-square, optionally floored: sqrt(sum w^2 + floor^2)."""
    return (tsum(w.square(), axis=0) + floor * floor) ** 0.5


def assert_finite(x, where):
    """Raise with a stage label if any element is NaN/Inf."""
    arr = x.data if isinstance(x, Tensor) else np.asarray(x)
    if not np.isfinite(arr).all():
        raise FloatingPointError(f"non-finite values at stage: {where}")
    return x


__all__ = [
    "LAYERNORM_EPS",
    "assert_finite",
    "bilinear_upsample_2x",
    "flatten_grid",
    "layer_norm",
    "leaky_relu",
    "rss_columns",
    "softmax_rows",
    "svd_singular_values",
    "unflatten_sheet",
    "upsample_matrix",
]
