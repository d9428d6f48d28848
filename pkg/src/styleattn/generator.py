"""Full generators: stacked encoder stages with output-skip RGB accumulation.

A generator starts from a learned constant sheet and runs one stage per
resolution. Encoder stages add a learned positional encoding at entry and
run style-injected encoder blocks; in hybrid mode, stages above the cutoff
resolution run StyleGAN2-style blocks of two modulated 3x3 convolutions
instead. Every stage converts its sheet to RGB through a demodulated linear
ToRGB and adds it into a running image that is bilinearly upsampled between
stages (output-skip), so the final image is the sum of upsampled per-stage
contributions.

Modes:
* "transformer" - encoder blocks everywhere, full attention
* "linformer"   - same, but blocks with n >= linformer_min_pixels project
                  keys/values to linformer_k rows
* "hybrid"      - encoder blocks up to hybrid_cutoff resolution, conv blocks
                  above

Every parameter is initialized from an RNG stream labeled by the parameter's
own name, so two modes that share structure have bit-identical shared
parameters for the same seed.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from .attention import LINFORMER_K, LINFORMER_MIN_PIXELS, LinformerProjector, linformer_active
from .encoder import BASELINE, NOISE_OFF, AblationVariant, EncoderBlock, LRELU_SLOPE
from .styles import ROLE_INPUT, ROLE_RGB, MappingNetwork, StyleRegistry, linear_weight, modulate
from .substrate import (
    RngStream,
    Tensor,
    bilinear_upsample_2x,
    flatten_grid,
    unflatten_sheet,
)
from .substrate.tensor import concat, leaky_relu, matmul, pad2d, reshape, take_flat


@dataclass(frozen=True)
class GeneratorConfig:
    target_resolution: int
    layers: tuple
    hidden: tuple
    start_resolution: int = 8
    mode: str = "transformer"
    linformer_k: int = LINFORMER_K
    linformer_min_pixels: int = LINFORMER_MIN_PIXELS
    hybrid_cutoff: int = 32
    rgb_channels: int = 3
    z_dim: int = 512
    w_dim: int = 512
    depth: int = 32
    heads: int | None = None
    pe_per_stage: bool = True
    noise_shared_spatial: bool = False
    bias_before_noise: bool = True
    variant: AblationVariant = field(default=BASELINE)

    def __post_init__(self):
        if self.mode not in ("transformer", "linformer", "hybrid"):
            raise ValueError(f"unknown mode {self.mode!r}")
        res, stages = self.start_resolution, len(self.layers)
        if len(self.hidden) != stages:
            raise ValueError("layers and hidden must list one entry per resolution stage")
        if self.start_resolution * 2 ** (stages - 1) != self.target_resolution:
            raise ValueError(
                f"schedule {self.start_resolution}->{self.target_resolution} "
                f"does not double across {stages} stages"
            )
        for h in self.hidden:
            d = min(self.depth, h)
            if h % d:
                raise ValueError(f"hidden size {h} not divisible by head depth {d}")

    def resolutions(self):
        return tuple(self.start_resolution * 2**t for t in range(len(self.layers)))

    def stage_kind(self, resolution):
        if self.mode == "hybrid" and resolution > self.hybrid_cutoff:
            return "conv"
        return "encoder"

    def sheet_shapes(self):
        """Expected (pixels, channels) of each stage's output sheet."""
        return tuple((r * r, h) for r, h in zip(self.resolutions(), self.hidden))


PRESETS = {
    "cifar10": GeneratorConfig(32, (1, 3, 3), (1024, 512, 512)),
    "stl10": GeneratorConfig(48, (1, 2, 2), (1024, 256, 64), start_resolution=12),
    "celeba": GeneratorConfig(64, (1, 2, 1, 1), (1024, 256, 64, 64)),
    "celeba-lin": GeneratorConfig(64, (1, 2, 1, 1), (1024, 256, 64, 64), mode="linformer"),
    "church-lin": GeneratorConfig(128, (1, 2, 1, 1, 1), (1024, 256, 64, 64, 64), mode="linformer"),
    "clevr-hybrid": GeneratorConfig(
        256, (1, 2, 1, 1, 1, 1), (1024, 256, 256, 256, 256, 128), mode="hybrid"
    ),
    "cityscapes-hybrid": GeneratorConfig(
        256, (1, 2, 1, 1, 1, 1), (1024, 256, 256, 256, 256, 128), mode="hybrid"
    ),
    # the published 512px table row lists six stages for a seven-stage
    # schedule; final conv stage added with channels halved
    "afhq-cat-hybrid": GeneratorConfig(
        512, (1, 2, 1, 1, 1, 1, 1), (1024, 256, 256, 256, 256, 64, 32), mode="hybrid"
    ),
    "ablation-small": GeneratorConfig(32, (1, 2, 2), (256, 64, 16)),
    "toy8": GeneratorConfig(8, (1,), (32,), z_dim=64, w_dim=64),
    "toy16": GeneratorConfig(16, (1, 1), (64, 32), z_dim=64, w_dim=64),
}


def preset(name, **overrides):
    if name not in PRESETS:
        raise KeyError(f"unknown preset {name!r}; available: {sorted(PRESETS)}")
    cfg = PRESETS[name]
    return replace(cfg, **overrides) if overrides else cfg


# -- ToRGB ---------------------------------------------------------------------


class ToRGB:
    """Demodulated linear map from a feature sheet to RGB, with bias."""

    def __init__(self, name, channels, rgb_channels, registry, seed_stream, dtype):
        self.name = name
        self.affine = registry.register(f"{name}.style", channels, ROLE_RGB)
        self.weight = linear_weight(seed_stream.child(f"{name}.weight"), channels, rgb_channels, dtype)
        self.bias = Tensor(np.zeros(rgb_channels), requires_grad=True, dtype=dtype)

    def named_parameters(self):
        out = {f"{self.name}.weight": self.weight, f"{self.name}.bias": self.bias}
        out.update(self.affine.named_parameters(f"{self.name}.style"))
        return out

    def __call__(self, x, w):
        s = self.affine(w)
        mw = modulate(self.weight, s)
        return matmul(x * s.values, self.weight) / mw.demod + self.bias


# -- modulated 3x3 convolution (hybrid high-resolution stages) -------------------


_patch_index_cache = {}


def _patch_indices(h, c):
    """Flat gather indices turning a padded (h+2, h+2, c) grid into
    (h*h, 9c) tap-major patches."""
    key = (h, c)
    if key not in _patch_index_cache:
        py, px = np.mgrid[0:h, 0:h]
        taps = []
        for dy in range(3):
            for dx in range(3):
                base = ((py + dy) * (h + 2) + (px + dx)) * c
                taps.append(base[..., None] + np.arange(c))
        _patch_index_cache[key] = np.concatenate(taps, axis=-1).reshape(h * h, 9 * c)
    return _patch_index_cache[key]


class ModulatedConv3x3:
    """StyleGAN2-style conv: modulate input channels, 3x3 conv, demodulate
    output channels, then noise, bias, leaky ReLU."""

    def __init__(self, name, c_in, c_out, resolution, registry, seed_stream, dtype,
                 shared_spatial_noise=False, bias_before_noise=True):
        self.name = name
        self.c_in = c_in
        self.c_out = c_out
        self.resolution = resolution
        self.dtype = np.dtype(dtype)
        self.shared_spatial_noise = shared_spatial_noise
        self.bias_before_noise = bias_before_noise
        self.affine = registry.register(f"{name}.style", c_in, ROLE_INPUT)
        self.weight = linear_weight(seed_stream.child(f"{name}.weight"), 9 * c_in, c_out, dtype)
        self.bias = Tensor(np.zeros(c_out), requires_grad=True, dtype=dtype)
        self.noise_scale = Tensor(np.zeros(()), requires_grad=True, dtype=dtype)
        self._fixed_noise = seed_stream.child(f"{name}.noise_buffer").normal(
            (resolution * resolution, c_out), dtype=dtype
        )

    def named_parameters(self):
        out = {
            f"{self.name}.weight": self.weight,
            f"{self.name}.bias": self.bias,
            f"{self.name}.noise_scale": self.noise_scale,
        }
        out.update(self.affine.named_parameters(f"{self.name}.style"))
        return out

    def _noise_sheet(self, noise):
        n = self.resolution * self.resolution
        if noise.mode == "fixed":
            sheet = self._fixed_noise
            if noise.shared_spatial or self.shared_spatial_noise:
                sheet = np.broadcast_to(sheet[:, :1], sheet.shape)
            return Tensor(sheet, dtype=self.dtype)
        stream = RngStream(noise.seed, ("noise", self.name))
        shared = noise.shared_spatial or self.shared_spatial_noise
        shape = (n, 1) if shared else (n, self.c_out)
        return Tensor(stream.normal(shape, dtype=self.dtype))

    def __call__(self, x, w, noise=NOISE_OFF):
        """x: (n, c_in) sheet at this conv's resolution."""
        r = self.resolution
        s = self.affine(w)
        s9 = concat([s.values] * 9, axis=0)
        mw = modulate(self.weight, s9)
        grid = unflatten_sheet(x * s.values, r)
        patches = take_flat(pad2d(grid, 1), _patch_indices(r, self.c_in))
        out = matmul(patches, self.weight) / mw.demod
        terms = [self.bias, self._noise_sheet(noise) * self.noise_scale] if noise.mode != "none" else [self.bias]
        if not self.bias_before_noise:
            terms = terms[::-1]
        for t in terms:
            out = out + t
        return leaky_relu(out, LRELU_SLOPE)


class HybridConvBlock:
    """One high-resolution stage layer: two modulated 3x3 convolutions."""

    def __init__(self, name, c_in, c_out, resolution, registry, seed_stream, dtype,
                 shared_spatial_noise=False, bias_before_noise=True):
        self.name = name
        self.conv0 = ModulatedConv3x3(f"{name}.conv0", c_in, c_out, resolution, registry,
                                      seed_stream, dtype, shared_spatial_noise, bias_before_noise)
        self.conv1 = ModulatedConv3x3(f"{name}.conv1", c_out, c_out, resolution, registry,
                                      seed_stream, dtype, shared_spatial_noise, bias_before_noise)

    def convs(self):
        return [self.conv0, self.conv1]

    def named_parameters(self):
        return {**self.conv0.named_parameters(), **self.conv1.named_parameters()}


# -- generator -------------------------------------------------------------------


class _Stage:
    __slots__ = ("index", "resolution", "kind", "blocks", "torgb", "pe")

    def __init__(self, index, resolution, kind, blocks, torgb, pe):
        self.index = index
        self.resolution = resolution
        self.kind = kind
        self.blocks = blocks
        self.torgb = torgb
        self.pe = pe


class Generator:
    """Parameter-complete generator built from a GeneratorConfig and a seed."""

    def __init__(self, config, seed=0, dtype=np.float32):
        self.config = config
        self.seed = int(seed)
        self.dtype = np.dtype(dtype)
        root = RngStream(seed)
        params = root.child("params")

        self.mapping = MappingNetwork(config.z_dim, config.w_dim, params.child("mapping"), dtype)
        self.registry = StyleRegistry(config.w_dim, params.child("styles"), dtype)

        n0, h0 = config.start_resolution**2, config.hidden[0]
        self.const = Tensor(params.child("const").normal((n0, h0), dtype=dtype), requires_grad=True)

        self.stages = []
        resolutions = config.resolutions()
        for t, (res, h) in enumerate(zip(resolutions, config.hidden)):
            c_entry = config.hidden[t - 1] if t > 0 else h0
            kind = config.stage_kind(res)
            n = res * res
            pe = None
            if kind == "encoder" and (config.pe_per_stage or t == 0):
                pe = Tensor(params.child(f"stage{t}.pe").normal((n, c_entry), dtype=dtype),
                            requires_grad=True)
            blocks = []
            for i in range(config.layers[t]):
                c_in = c_entry if i == 0 else h
                name = f"stage{t}.block{i}"
                if kind == "encoder":
                    projector = None
                    if config.mode == "linformer" and linformer_active(n, config.linformer_min_pixels):
                        projector = LinformerProjector(
                            n, config.linformer_k, params.child(f"{name}.E"), dtype
                        )
                    blocks.append(EncoderBlock(
                        name, c_in, h, h, n, self.registry, params,
                        depth=min(config.depth, h), heads=config.heads,
                        variant=config.variant, projector=projector, dtype=dtype,
                        bias_before_noise=config.bias_before_noise,
                    ))
                else:
                    blocks.append(HybridConvBlock(
                        name, c_in, h, res, self.registry, params, dtype,
                        config.noise_shared_spatial, config.bias_before_noise,
                    ))
            torgb = ToRGB(f"stage{t}.torgb", h, config.rgb_channels, self.registry,
                          params, dtype)
            self.stages.append(_Stage(t, res, kind, blocks, torgb, pe))

        self._slots = []
        for stage in self.stages:
            for block in stage.blocks:
                if stage.kind == "encoder":
                    self._slots.append((block.name, stage.resolution))
                else:
                    for conv in block.convs():
                        self._slots.append((conv.name, stage.resolution))
            self._slots.append((stage.torgb.name, stage.resolution))

    # -- inventory ---------------------------------------------------------------

    def style_slots(self):
        """(name, stage resolution) of every style-consuming layer, in
        consumption order."""
        return list(self._slots)

    @property
    def num_style_slots(self):
        return len(self._slots)

    def named_parameters(self):
        out = self.mapping.named_parameters()
        out["const"] = self.const
        for stage in self.stages:
            if stage.pe is not None:
                out[f"stage{stage.index}.pe"] = stage.pe
            for block in stage.blocks:
                out.update(block.named_parameters())
            out.update(stage.torgb.named_parameters())
        return out

    def parameter_count(self):
        return sum(p.size for p in self.named_parameters().values())

    def describe(self):
        from .attention import full_attention_flops, linformer_attention_flops

        cfg = self.config
        stages = []
        for s in self.stages:
            n = s.resolution**2
            h = cfg.hidden[s.index]
            info = {
                "resolution": s.resolution,
                "kind": s.kind,
                "layers": len(s.blocks),
                "hidden": h,
                "pixels": n,
            }
            if s.kind == "encoder":
                head_cfg = s.blocks[0].head_cfg
                projected = s.blocks[0].projector is not None
                per_block = (
                    linformer_attention_flops(n, cfg.linformer_k, head_cfg.depth, head_cfg.heads)
                    if projected
                    else full_attention_flops(n, head_cfg.depth, head_cfg.heads)
                )
                info["attention_flops_per_block"] = per_block
                info["attention_projected"] = projected
            stages.append(info)
        return {
            "mode": cfg.mode,
            "parameter_count": self.parameter_count(),
            "style_slots": self.num_style_slots,
            "stages": stages,
        }

    # -- latents ------------------------------------------------------------------

    def sample_z(self, stream):
        return Tensor(stream.normal((self.config.z_dim,), dtype=self.dtype))

    def map_latent(self, z):
        if not isinstance(z, Tensor):
            z = Tensor(z, dtype=self.dtype)
        return self.mapping(z)

    def broadcast_styles(self, w):
        return [w] * self.num_style_slots

    def styles_for_mixing(self, w_low, w_high, cutoff_resolution):
        """Per-slot latents: slots at resolution <= cutoff take w_low."""
        return [w_low if res <= cutoff_resolution else w_high for _, res in self._slots]

    # -- synthesis -------------------------------------------------------------------

    def synthesize(self, z, noise=NOISE_OFF, capture=None):
        return self.synthesize_with_styles(self.broadcast_styles(self.map_latent(z)), noise, capture)

    def synthesize_with_styles(self, ws, noise=NOISE_OFF, capture=None):
        """ws: one intermediate latent per style slot (see style_slots())."""
        if len(ws) != self.num_style_slots:
            raise ValueError(f"need {self.num_style_slots} per-slot latents, got {len(ws)}")
        ws = iter(list(ws))
        x = self.const
        rgb = None
        last = len(self.stages) - 1
        for stage in self.stages:
            if stage.pe is not None:
                x = x + stage.pe
            for block in stage.blocks:
                if stage.kind == "encoder":
                    x = block(x, next(ws), noise=noise, capture=capture)
                else:
                    for conv in block.convs():
                        x = conv(x, next(ws), noise=noise)
            rgb_t = stage.torgb(x, next(ws))
            rgb = rgb_t if rgb is None else rgb + rgb_t
            if capture is not None:
                capture[f"stage{stage.index}.sheet"] = x.detach()
                capture[f"stage{stage.index}.rgb"] = rgb_t.detach()
            if stage.index != last:
                r = stage.resolution
                x = flatten_grid(bilinear_upsample_2x(unflatten_sheet(x, r)))
                rgb = flatten_grid(bilinear_upsample_2x(unflatten_sheet(rgb, r)))
        return unflatten_sheet(rgb, self.config.target_resolution)

    def export_attention(self, z, noise=NOISE_OFF):
        """Attention tensors from a synthesis pass, with grid metadata.

        Returns a list of records: {stage, block, resolution, key_pixels,
        tensor (heads, n, m)}."""
        capture = {}
        self.synthesize(z, noise=noise, capture=capture)
        records = []
        for stage in self.stages:
            if stage.kind != "encoder":
                continue
            for i, block in enumerate(stage.blocks):
                key = f"{block.name}.attention"
                if key in capture:
                    a = capture[key]
                    records.append({
                        "stage": stage.index,
                        "block": i,
                        "resolution": stage.resolution,
                        "key_pixels": a.shape[-1],
                        "tensor": a.numpy(),
                    })
        return records


def build(config, seed=0, dtype=np.float32):
    """Construct a parameter-complete generator."""
    return Generator(config, seed=seed, dtype=dtype)
