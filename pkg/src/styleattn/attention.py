"""Many-head self-attention with fixed per-head depth, plus low-rank projection.

The head count is hidden_dim / 32 by default: many heads of depth 32 give
each group of channels its own attention kernel. A config escape hatch pins
the head count instead (depth then follows) for head-sweep experiments.

For long pixel sequences, keys and values can be projected from n to k_lin
rows by a single per-layer matrix E shared by key and value and by all heads,
turning the attention stage from O(n^2) into O(n*k_lin).
"""

import numpy as np

from .styles import apply_demodulated
from .substrate import RngStream, Tensor
from .substrate.tensor import matmul, reshape, softmax_rows, transpose

HEAD_DEPTH = 32

LINFORMER_K = 256
LINFORMER_MIN_PIXELS = 1024


class HeadConfig:
    """hidden_dim split into heads of equal depth (default depth 32)."""

    __slots__ = ("hidden_dim", "depth", "heads")

    def __init__(self, hidden_dim, depth=HEAD_DEPTH, heads=None):
        if heads is not None:
            if hidden_dim % heads:
                raise ValueError(f"hidden {hidden_dim} not divisible by heads {heads}")
            depth = hidden_dim // heads
        if hidden_dim % depth:
            raise ValueError(f"hidden {hidden_dim} not divisible by depth {depth}")
        self.hidden_dim = hidden_dim
        self.depth = depth
        self.heads = hidden_dim // depth


def split_heads(x, cfg):
    """(n, hidden) -> (heads, n, depth); exact inverse of merge_heads."""
    n, hidden = x.shape
    if hidden != cfg.hidden_dim:
        raise ValueError(f"sheet width {hidden} != hidden_dim {cfg.hidden_dim}")
    return transpose(reshape(x, (n, cfg.heads, cfg.depth)), (1, 0, 2))


def merge_heads(x):
    """(heads, n, depth) -> (n, heads*depth)."""
    heads, n, depth = x.shape
    return reshape(transpose(x, (1, 0, 2)), (n, heads * depth))


def attention_map(q, k):
    """Row-stochastic map softmax(Q K^T / sqrt(depth)); per head when batched."""
    if q.shape[-1] != k.shape[-1]:
        raise ValueError(f"query/key depth mismatch: {q.shape} vs {k.shape}")
    if not (np.isfinite(q.data).all() and np.isfinite(k.data).all()):
        raise ValueError("attention_map: non-finite inputs")
    logits = matmul(q, transpose(k, None if k.ndim == 2 else (0, 2, 1)))
    return softmax_rows(logits * (1.0 / np.sqrt(q.shape[-1])))


def attend(a, v):
    """Weighted sums A V; each output row is a convex combination of V rows."""
    if a.shape[-1] != v.shape[-2]:
        raise ValueError(f"attention columns {a.shape} do not match value rows {v.shape}")
    return matmul(a, v)


def integrate_heads(heads_out, mw):
    """Concatenate heads and apply the modulated integration weight,
    dividing output columns by the encoder-output demod coefficients."""
    merged = merge_heads(heads_out)
    if merged.shape[1] != mw.weight.shape[0]:
        raise ValueError(f"merged width {merged.shape} does not match weight rows {mw.weight.shape}")
    return apply_demodulated(merged, mw)


class LinformerProjector:
    """Per-layer (n, k_lin) projection applied to both keys and values."""

    def __init__(self, n, k_lin=LINFORMER_K, seed_stream=None, dtype=np.float32):
        stream = seed_stream or RngStream(0, ("linformer",))
        # i.i.d. normal, std 1/sqrt(n): rows of E^T K keep the key scale
        self.n = n
        self.k_lin = k_lin
        self.weight = Tensor(
            stream.normal((n, k_lin), dtype=dtype) * float(n**-0.5), requires_grad=True
        )

    def named_parameters(self, prefix):
        return {f"{prefix}.E": self.weight}

    def project(self, k, v):
        """(heads, n, depth) keys/values -> (heads, k_lin, depth)."""
        if k.shape[-2] != self.n or v.shape[-2] != self.n:
            raise ValueError(f"projector built for n={self.n}, got {k.shape} / {v.shape}")
        e_t = transpose(self.weight, None)
        return matmul(e_t, k), matmul(e_t, v)


def linformer_active(n, min_pixels=LINFORMER_MIN_PIXELS):
    """Projection is used only for long sequences (n >= 1024, i.e. 32x32 up)."""
    return n >= min_pixels


def attention_stage(q, k, v, projector=None):
    """Full or projected attention over per-head tensors.

    Returns (per-head outputs, attention tensor). The attention tensor has
    shape (heads, n, n) or (heads, n, k_lin).
    """
    if projector is not None:
        k, v = projector.project(k, v)
    a = attention_map(q, k)
    return attend(a, v), a


# -- analytic cost model ---------------------------------------------------------


def full_attention_flops(n, depth, heads=1):
    """Exactly what the instrumented counter records for the full path."""
    return heads * (4 * n * n * depth + 6 * n * n)


def linformer_attention_flops(n, k_lin, depth, heads=1):
    """Counter-exact cost of project + attend on the low-rank path."""
    return heads * (8 * n * k_lin * depth + 6 * n * k_lin)


def attention_map_elements(n, m, heads=1):
    return heads * n * m
