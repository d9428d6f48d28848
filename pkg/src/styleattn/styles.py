"""Latent mapping, per-layer style affines, and weight modulation/demodulation.

A style vector s scales the channels feeding a linear map, which is the same
thing as scaling the rows of its weight: w'_ij = s_i * w_ij. Under the usual
unit-variance assumption on the inputs, the column-wise root-sum-square of
the modulated weight predicts the output standard deviation,

    sigma_j = sqrt(sum_i w'_ij^2),

so dividing output column j by sigma_j restores unit scale. This module owns
that algebra; the encoder and ToRGB layers reuse it for every demodulated
path (query/key/value, multi-head integration, residual, RGB).

Demodulation here divides activations rather than weights, which keeps one
ModulatedWeight usable for the three fused query/key/value column blocks;
the two routes agree to float associativity error.
"""

import numpy as np

from .substrate import RngStream, Tensor
from .substrate.tensor import leaky_relu, matmul, tsum

DEMOD_FLOOR = 1e-12

ROLE_INPUT = "input"
ROLE_VALUE = "value"
ROLE_RGB = "rgb"


class StyleVector:
    """Per-channel scale with a role tag (input / value / rgb)."""

    __slots__ = ("values", "role")

    def __init__(self, values, role):
        if role not in (ROLE_INPUT, ROLE_VALUE, ROLE_RGB):
            raise ValueError(f"unknown style role: {role}")
        self.values = values
        self.role = role

    def __len__(self):
        return self.values.shape[0]


class ModulatedWeight:
    """Row-scaled weight plus its per-column demodulation coefficients."""

    __slots__ = ("weight", "demod", "role")

    def __init__(self, weight, demod, role=None):
        self.weight = weight
        self.demod = demod
        self.role = role


def _style_tensor(style):
    return style.values if isinstance(style, StyleVector) else style


def modulate(weight, style):
    """Scale row i of `weight` by s_i and compute demod coefficients.

    The row scaling is exact (bit-reproducible); sigma is floored at
    DEMOD_FLOOR so zero columns divide cleanly.
    """
    s = _style_tensor(style)
    if s.ndim != 1 or weight.shape[0] != s.shape[0]:
        raise ValueError(f"style length {s.shape} does not match weight rows {weight.shape}")
    modulated = weight * s.reshape(-1, 1)
    sigma = (tsum(modulated.square(), axis=0) + DEMOD_FLOOR**2) ** 0.5
    role = style.role if isinstance(style, StyleVector) else None
    return ModulatedWeight(modulated, sigma, role)


def apply_demodulated(x, mw):
    """x @ W' with column j divided by sigma_j."""
    if x.shape[-1] != mw.weight.shape[0]:
        raise ValueError(f"sheet channels {x.shape} do not match weight rows {mw.weight.shape}")
    return matmul(x, mw.weight) / mw.demod


def output_demod_coeffs(mw):
    """Per-output-feature-map coefficients sigma''_k for encoder-output demod.

    Built from the multi-head integration weight modulated by the value
    style; dividing the integrated output columns by these leaves each
    pixel's residual std at sqrt(sum of squared attention row entries).
    """
    if mw.role is not None and mw.role != ROLE_VALUE:
        raise ValueError(f"encoder-output demod expects a value-modulated weight, got role {mw.role!r}")
    return mw.demod


def residual_pixel_std(attention_rows):
    """sqrt(sum_m A_lm^2) per pixel: the post-demod std of the attention branch."""
    a = attention_rows.data if isinstance(attention_rows, Tensor) else np.asarray(attention_rows)
    return np.sqrt((a * a).sum(axis=-1))


# -- parameter initialization -------------------------------------------------


def linear_weight(stream, fan_in, fan_out, dtype=np.float32):
    """uniform(+-1/sqrt(fan_in)), the stock linear-layer convention."""
    bound = 1.0 / np.sqrt(fan_in)
    return Tensor(stream.uniform(-bound, bound, (fan_in, fan_out), dtype=dtype), requires_grad=True)


# -- latent mapping -------------------------------------------------------------


class MappingNetwork:
    """Depth-2 fully connected map from sampled latents z to style space w."""

    def __init__(self, z_dim=512, w_dim=512, seed_stream=None, dtype=np.float32):
        self.z_dim = z_dim
        self.w_dim = w_dim
        stream = seed_stream or RngStream(0, ("mapping",))
        self.w1 = linear_weight(stream.child("w1"), z_dim, w_dim, dtype)
        self.b1 = Tensor(np.zeros(w_dim), requires_grad=True, dtype=dtype)
        self.w2 = linear_weight(stream.child("w2"), w_dim, w_dim, dtype)
        self.b2 = Tensor(np.zeros(w_dim), requires_grad=True, dtype=dtype)

    def weight_matrices(self):
        return [self.w1, self.w2]

    def named_parameters(self, prefix="mapping"):
        return {
            f"{prefix}.w1": self.w1,
            f"{prefix}.b1": self.b1,
            f"{prefix}.w2": self.w2,
            f"{prefix}.b2": self.b2,
        }

    def __call__(self, z):
        if z.shape[-1] != self.z_dim:
            raise ValueError(f"latent dim {z.shape} != {self.z_dim}")
        hidden = leaky_relu(matmul(z, self.w1) + self.b1, 0.2)
        return matmul(hidden, self.w2) + self.b2


def map_latent(mapping, z):
    return mapping(z)


# -- per-layer affines -----------------------------------------------------------


class StyleAffine:
    """s = A w + b with b initialized to ones, so an untrained affine is ~identity."""

    def __init__(self, w_dim, channels, role, seed_stream=None, dtype=np.float32):
        stream = seed_stream or RngStream(0, ("affine",))
        self.role = role
        self.channels = channels
        self.weight = linear_weight(stream.child("A"), w_dim, channels, dtype)
        self.bias = Tensor(np.ones(channels), requires_grad=True, dtype=dtype)

    def named_parameters(self, prefix):
        return {f"{prefix}.A": self.weight, f"{prefix}.b": self.bias}

    def __call__(self, w):
        return StyleVector(matmul(w, self.weight) + self.bias, self.role)


class StyleRegistry:
    """Keeps one independently parameterized affine per registered layer id."""

    def __init__(self, w_dim, seed_stream, dtype=np.float32):
        self.w_dim = w_dim
        self._stream = seed_stream
        self._dtype = dtype
        self._affines = {}

    def register(self, layer_id, channels, role):
        if layer_id in self._affines:
            raise ValueError(f"layer id already registered: {layer_id}")
        affine = StyleAffine(self.w_dim, channels, role, self._stream.child(layer_id), self._dtype)
        self._affines[layer_id] = affine
        return affine

    def affine_style(self, w, layer_id):
        if layer_id not in self._affines:
            raise KeyError(f"unregistered style layer id: {layer_id}")
        return self._affines[layer_id](w)

    def layer_ids(self):
        return list(self._affines)

    def named_parameters(self, prefix="styles"):
        out = {}
        for layer_id, affine in self._affines.items():
            out.update(affine.named_parameters(f"{prefix}.{layer_id}"))
        return out
