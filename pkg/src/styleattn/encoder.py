"""Style-injected transformer encoder block.

Default pipeline (the Baseline row of the ablation table):

    mod input -> pre-layernorm -> fused Q/K/V linear -> Q/K/V demod
    -> mod value -> (low-rank K/V projection) -> per-head attention
    -> multi-head integration with output demod -> demodulated residual
    -> bias -> noise -> leaky ReLU

Style modulation happens twice: the input style scales the block input (its
scale is removed from Q, K and V by dividing each output column by the
modulated weight's column norm), and the value style scales V (removed from
the integrated output and the residual the same way). Q/K demodulation also
keeps any one logit from blowing up and freezing the attention map.

Ablation variants rewire the block:

* layernorm_pos: "pre" (before Q/K/V), "a" (after integration), "b" (block
  end), "none"
* residual: "modified" (demodulated linear of the value-modulated features),
  "a" (identity add of the raw block input; needs c_in == c_out), "b"
  (post-layernorm input through an untied linear, no demod), "none"
* style_value: "on", "off", "tied" (reuse the input style; needs
  c_in == hidden)
* style_input: "on", "off"
* feed_forward: adds a bias-free 2-layer MLP (expansion 4) with residual
  add at the block end

The "a"/"b" wirings follow the ablation figure as read, which leaves some
freedom; the mapping above is this artifact's documented choice.
"""

from dataclasses import dataclass

import numpy as np

from .attention import HeadConfig, attention_map, attend, merge_heads, split_heads
from .styles import ROLE_INPUT, ROLE_VALUE, StyleVector, linear_weight, modulate
from .substrate import RngStream, Tensor, assert_finite, layer_norm
from .substrate.tensor import leaky_relu, matmul

LRELU_SLOPE = 0.2

_LN_POSITIONS = ("pre", "a", "b", "none")
_RESIDUALS = ("modified", "a", "b", "none")
_STYLE_VALUE = ("on", "off", "tied")
_STYLE_INPUT = ("on", "off")


@dataclass(frozen=True)
class AblationVariant:
    layernorm_pos: str = "pre"
    residual: str = "modified"
    style_value: str = "on"
    style_input: str = "on"
    feed_forward: bool = False

    def __post_init__(self):
        if self.layernorm_pos not in _LN_POSITIONS:
            raise ValueError(f"layernorm_pos must be one of {_LN_POSITIONS}")
        if self.residual not in _RESIDUALS:
            raise ValueError(f"residual must be one of {_RESIDUALS}")
        if self.style_value not in _STYLE_VALUE:
            raise ValueError(f"style_value must be one of {_STYLE_VALUE}")
        if self.style_input not in _STYLE_INPUT:
            raise ValueError(f"style_input must be one of {_STYLE_INPUT}")

    def table_row(self):
        """Structural fingerprint in the ablation table's column layout."""
        return {
            "style1": self.style_input == "on",
            "style2": self.style_value != "off",
            "style1=style2": self.style_value == "tied",
            "residual_a": self.residual == "a",
            "residual_b": self.residual == "b",
            "residual_c": self.residual == "modified",
            "layernorm_a": self.layernorm_pos == "a",
            "layernorm_b": self.layernorm_pos == "b",
            "layernorm_c": self.layernorm_pos == "pre",
            "feed_forward": self.feed_forward,
        }


BASELINE = AblationVariant()

VARIANT_PRESETS = {
    "baseline": BASELINE,
    "style-input-only": AblationVariant(style_value="off"),
    "style-value-only": AblationVariant(style_input="off"),
    "style-tied": AblationVariant(style_value="tied"),
    "residual-none": AblationVariant(residual="none"),
    "residual-a": AblationVariant(residual="a"),
    "residual-b": AblationVariant(residual="b"),
    "layernorm-a": AblationVariant(layernorm_pos="a"),
    "layernorm-b": AblationVariant(layernorm_pos="b"),
    "layernorm-none": AblationVariant(layernorm_pos="none"),
    "feed-forward": AblationVariant(feed_forward=True),
}

# five distinct graph structures covering every toggle; used by the gradient gate
GRAD_CHECK_VARIANTS = ("baseline", "style-tied", "residual-b", "layernorm-a", "feed-forward")


@dataclass(frozen=True)
class NoiseSpec:
    """How per-block noise is produced.

    mode "none" is fully deterministic, "random" draws from a labeled stream
    keyed by `seed`, "fixed" reuses a buffer sampled at block construction.
    shared_spatial draws one (n, 1) sheet broadcast across channels.
    """

    mode: str = "none"
    seed: int = 0
    shared_spatial: bool = False

    def __post_init__(self):
        if self.mode not in ("none", "random", "fixed"):
            raise ValueError(f"noise mode must be none|random|fixed, got {self.mode!r}")


NOISE_OFF = NoiseSpec("none")


class EncoderBlock:
    """One encoder layer mapping an (n, c_in) sheet to (n, c_out)."""

    def __init__(
        self,
        name,
        c_in,
        hidden,
        c_out,
        n_pixels,
        registry,
        seed_stream,
        depth=32,
        heads=None,
        variant=BASELINE,
        projector=None,
        dtype=np.float32,
        bias_before_noise=True,
    ):
        self.name = name
        self.c_in = c_in
        self.hidden = hidden
        self.c_out = c_out
        self.n_pixels = n_pixels
        self.variant = variant
        self.projector = projector
        self.dtype = np.dtype(dtype)
        self.bias_before_noise = bias_before_noise
        self.head_cfg = HeadConfig(hidden, depth=depth, heads=heads)

        if variant.style_value == "tied" and c_in != hidden:
            raise ValueError("tied styles need c_in == hidden (input and value styles share one vector)")
        if variant.residual == "a" and c_in != c_out:
            raise ValueError("identity residual (variant a) needs c_in == c_out")

        self.style_in = None
        if variant.style_input == "on":
            self.style_in = registry.register(f"{name}.style_in", c_in, ROLE_INPUT)
        self.style_val = None
        if variant.style_value == "on":
            self.style_val = registry.register(f"{name}.style_val", hidden, ROLE_VALUE)

        self.w_qkv = linear_weight(seed_stream.child(f"{name}.w_qkv"), c_in, 3 * hidden, dtype)
        self.w_out = linear_weight(seed_stream.child(f"{name}.w_out"), hidden, c_out, dtype)
        self.w_res = None
        if variant.residual == "modified":
            self.w_res = linear_weight(seed_stream.child(f"{name}.w_res"), hidden, c_out, dtype)
        elif variant.residual == "b":
            self.w_res = linear_weight(seed_stream.child(f"{name}.w_res"), c_in, c_out, dtype)

        self.ln_gain = self.ln_bias = None
        if variant.layernorm_pos != "none":
            ln_dim = c_in if variant.layernorm_pos == "pre" else c_out
            self.ln_gain = Tensor(np.ones(ln_dim), requires_grad=True, dtype=dtype)
            self.ln_bias = Tensor(np.zeros(ln_dim), requires_grad=True, dtype=dtype)

        self.bias = Tensor(np.zeros(c_out), requires_grad=True, dtype=dtype)
        self.noise_scale = Tensor(np.zeros(()), requires_grad=True, dtype=dtype)
        self._fixed_noise = seed_stream.child(f"{name}.noise_buffer").normal((n_pixels, c_out), dtype=dtype)

        self.ff1 = self.ff2 = None
        if variant.feed_forward:
            self.ff1 = linear_weight(seed_stream.child(f"{name}.ff1"), c_out, 4 * c_out, dtype)
            self.ff2 = linear_weight(seed_stream.child(f"{name}.ff2"), 4 * c_out, c_out, dtype)

    # -- inventory -----------------------------------------------------------

    def named_parameters(self, prefix=None):
        prefix = prefix or self.name
        out = {f"{prefix}.w_qkv": self.w_qkv, f"{prefix}.w_out": self.w_out}
        if self.w_res is not None:
            out[f"{prefix}.w_res"] = self.w_res
        if self.ln_gain is not None:
            out[f"{prefix}.ln_gain"] = self.ln_gain
            out[f"{prefix}.ln_bias"] = self.ln_bias
        out[f"{prefix}.bias"] = self.bias
        out[f"{prefix}.noise_scale"] = self.noise_scale
        if self.projector is not None:
            out.update(self.projector.named_parameters(prefix))
        if self.ff1 is not None:
            out[f"{prefix}.ff1"] = self.ff1
            out[f"{prefix}.ff2"] = self.ff2
        if self.style_in is not None:
            out.update(self.style_in.named_parameters(f"{prefix}.style_in"))
        if self.style_val is not None:
            out.update(self.style_val.named_parameters(f"{prefix}.style_val"))
        return out

    def stage_order(self):
        """Ordered stage labels of the built graph (structural assertions)."""
        v = self.variant
        stages = []
        if v.style_input == "on":
            stages.append("mod_input")
        if v.layernorm_pos == "pre":
            stages.append("layernorm")
        stages += ["qkv", "demod_qkv"]
        if v.style_value != "off":
            stages.append("mod_value")
        if self.projector is not None:
            stages.append("project_kv")
        stages += ["attention", "integrate"]
        if v.residual != "none":
            stages.append(f"residual_{v.residual}")
        if v.layernorm_pos == "a":
            stages.append("layernorm")
        stages += ["bias", "noise"] if self.bias_before_noise else ["noise", "bias"]
        stages.append("activation")
        if v.layernorm_pos == "b":
            stages.append("layernorm")
        if v.feed_forward:
            stages.append("feed_forward")
        return stages

    # -- noise ----------------------------------------------------------------

    def _noise_sheet(self, noise):
        if noise.mode == "fixed":
            sheet = self._fixed_noise
            if noise.shared_spatial:
                sheet = np.broadcast_to(sheet[:, :1], sheet.shape)
            return Tensor(sheet, dtype=self.dtype)
        stream = RngStream(noise.seed, ("noise", self.name))
        shape = (self.n_pixels, 1) if noise.shared_spatial else (self.n_pixels, self.c_out)
        return Tensor(stream.normal(shape, dtype=self.dtype))

    # -- forward ----------------------------------------------------------------

    def __call__(self, x, w, noise=NOISE_OFF, capture=None):
        v = self.variant
        if x.shape != (self.n_pixels, self.c_in):
            raise ValueError(f"{self.name}: expected sheet {(self.n_pixels, self.c_in)}, got {x.shape}")
        assert_finite(x, f"{self.name}:input")

        ones_in = StyleVector(Tensor(np.ones(self.c_in), dtype=self.dtype), ROLE_INPUT)
        s_in = self.style_in(w) if v.style_input == "on" else ones_in
        h = x * s_in.values if v.style_input == "on" else x

        if v.layernorm_pos == "pre":
            h = layer_norm(h, self.ln_gain, self.ln_bias)
            assert_finite(h, f"{self.name}:layernorm")

        mw_qkv = modulate(self.w_qkv, s_in)
        qkv = matmul(h, self.w_qkv) / mw_qkv.demod
        assert_finite(qkv, f"{self.name}:qkv")
        hd = self.hidden
        q, k, val = qkv[:, :hd], qkv[:, hd : 2 * hd], qkv[:, 2 * hd :]
        if capture is not None:
            capture[f"{self.name}.qkv_demod"] = qkv.detach()

        if v.style_value == "on":
            s_val = self.style_val(w)
        elif v.style_value == "tied":
            s_val = StyleVector(s_in.values, ROLE_VALUE)
        else:
            s_val = StyleVector(Tensor(np.ones(hd), dtype=self.dtype), ROLE_VALUE)
        vm = val * s_val.values

        q_h = split_heads(q, self.head_cfg)
        k_h = split_heads(k, self.head_cfg)
        v_h = split_heads(vm, self.head_cfg)
        if self.projector is not None:
            k_h, v_h = self.projector.project(k_h, v_h)

        a = attention_map(q_h, k_h)
        heads_out = attend(a, v_h)
        if capture is not None:
            capture[f"{self.name}.attention"] = a.detach()

        mw_out = modulate(self.w_out, s_val)
        integrated = matmul(merge_heads(heads_out), self.w_out) / mw_out.demod
        assert_finite(integrated, f"{self.name}:integrate")
        if capture is not None:
            capture[f"{self.name}.integrated"] = integrated.detach()

        if v.residual == "modified":
            mw_res = modulate(self.w_res, s_val)
            out = integrated + matmul(vm, self.w_res) / mw_res.demod
        elif v.residual == "a":
            out = integrated + x
        elif v.residual == "b":
            out = integrated + matmul(h, self.w_res)
        else:
            out = integrated
        if capture is not None:
            capture[f"{self.name}.pre_tail"] = out.detach()

        if v.layernorm_pos == "a":
            out = layer_norm(out, self.ln_gain, self.ln_bias)

        terms = [self.bias, self._noise_sheet(noise) * self.noise_scale] if noise.mode != "none" else [self.bias]
        if not self.bias_before_noise:
            terms = terms[::-1]
        for t in terms:
            out = out + t
        out = leaky_relu(out, LRELU_SLOPE)

        if v.layernorm_pos == "b":
            out = layer_norm(out, self.ln_gain, self.ln_bias)

        if v.feed_forward:
            out = out + matmul(leaky_relu(matmul(out, self.ff1), LRELU_SLOPE), self.ff2)

        assert_finite(out, f"{self.name}:output")
        return out
