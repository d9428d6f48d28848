"""Deterministic dense numeric layer: tensors, autodiff, seeded RNG, op counting."""

from . import flops, ops
from .flops import count_ops, counter
from .ops import (
    assert_finite,
    bilinear_upsample_2x,
    flatten_grid,
    layer_norm,
    rss_columns,
    svd_singular_values,
    unflatten_sheet,
    upsample_matrix,
)
from .rng import RngStream, stream_id
from .tensor import (
    Tensor,
    concat,
    constant,
    leaky_relu,
    matmul,
    pad2d,
    parameter,
    reshape,
    softmax_rows,
    take_flat,
    tmean,
    transpose,
    tsum,
)

__all__ = [
    "RngStream",
    "Tensor",
    "assert_finite",
    "bilinear_upsample_2x",
    "concat",
    "constant",
    "count_ops",
    "counter",
    "flatten_grid",
    "flops",
    "layer_norm",
    "leaky_relu",
    "matmul",
    "ops",
    "pad2d",
    "parameter",
    "reshape",
    "rss_columns",
    "softmax_rows",
    "stream_id",
    "svd_singular_values",
    "take_flat",
    "tmean",
    "transpose",
    "tsum",
    "unflatten_sheet",
    "upsample_matrix",
]
