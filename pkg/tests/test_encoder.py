import numpy as np
import pytest

from styleattn.attention import LinformerProjector
from styleattn.encoder import (
    BASELINE,
    GRAD_CHECK_VARIANTS,
    AblationVariant,
    EncoderBlock,
    NoiseSpec,
    VARIANT_PRESETS,
)
from styleattn.styles import MappingNetwork, StyleRegistry, apply_demodulated, modulate
from styleattn.substrate import RngStream, Tensor
from styleattn.substrate.tensor import leaky_relu


def make_block(variant=BASELINE, c_in=64, hidden=64, c_out=64, n=16, seed=0, dtype=np.float64, projector=None, w_dim=32):
    registry = StyleRegistry(w_dim, RngStream(seed, ("styles",)), dtype=dtype)
    block = EncoderBlock(
        "enc", c_in, hidden, c_out, n,
        registry, RngStream(seed, ("params",)),
        variant=variant, dtype=dtype, projector=projector,
    )
    return block, registry


def latent(seed=1, dim=32, dtype=np.float64):
    return Tensor(np.random.default_rng(seed).normal(size=dim), dtype=dtype)


def sheet(seed=2, n=16, c=64, dtype=np.float64):
    return Tensor(np.random.default_rng(seed).normal(size=(n, c)), dtype=dtype)


# -- identity configuration ------------------------------------------------------


def test_identity_block_constant_input_constant_output():
    block, _ = make_block()
    block.style_in.weight.assign(np.zeros((32, 64)))
    block.style_val.weight.assign(np.zeros((32, 64)))
    block.w_out.assign(np.eye(64))
    block.w_res.assign(np.zeros((64, 64)))
    x = Tensor(np.full((16, 64), 3.0), dtype=np.float64)
    out = block(x, latent()).numpy()
    np.testing.assert_allclose(out, 0.0, atol=1e-12)
    assert out.shape == (16, 64)


def test_identity_block_output_is_lrelu_of_attention_path():
    block, _ = make_block()
    block.style_in.weight.assign(np.zeros((32, 64)))
    block.style_val.weight.assign(np.zeros((32, 64)))
    block.w_out.assign(np.eye(64))
    block.w_res.assign(np.zeros((64, 64)))
    capture = {}
    out = block(sheet(), latent(), capture=capture).numpy()
    expected = leaky_relu(capture["enc.integrated"], 0.2).numpy()
    np.testing.assert_allclose(out, expected, atol=1e-12)


# -- determinism --------------------------------------------------------------------


def test_deterministic_with_noise_off():
    block, _ = make_block()
    x, w = sheet(), latent()
    a = block(x, w).numpy()
    b = block(x, w).numpy()
    assert np.array_equal(a, b)


def test_deterministic_with_seeded_noise():
    block, _ = make_block()
    block.noise_scale.assign(np.asarray(1.0))
    x, w = sheet(), latent()
    spec = NoiseSpec("random", seed=99)
    assert np.array_equal(block(x, w, spec).numpy(), block(x, w, spec).numpy())
    other = block(x, w, NoiseSpec("random", seed=100)).numpy()
    assert not np.array_equal(block(x, w, spec).numpy(), other)


def test_fixed_noise_buffer_reused():
    block, _ = make_block()
    block.noise_scale.assign(np.asarray(0.5))
    x, w = sheet(), latent()
    a = block(x, w, NoiseSpec("fixed")).numpy()
    b = block(x, w, NoiseSpec("fixed", seed=123)).numpy()
    assert np.array_equal(a, b)  # fixed buffer ignores the seed


def test_shared_spatial_noise_equal_across_channels():
    block, _ = make_block()
    block.noise_scale.assign(np.asarray(1.0))
    block.bias.assign(np.zeros(64))
    x = Tensor(np.zeros((16, 64)), dtype=np.float64)
    out = block(x, latent(), NoiseSpec("random", seed=5, shared_spatial=True)).numpy()
    for j in range(1, 64):
        np.testing.assert_array_equal(out[:, j], out[:, 0])


# -- demodulated Q/K/V statistics ------------------------------------------------------


def test_qkv_stage3_demod_unit_std():
    # the stage-3 algebra itself: unit-std inputs through the modulated
    # weight route, demodulated -> unit std within 3%
    block, _ = make_block()
    mapping = MappingNetwork(32, 32, RngStream(8, ("map",)), dtype=np.float64)
    s = block.style_in(mapping(latent(4)))
    x = Tensor(np.random.default_rng(3).normal(size=(100_000, 64)), dtype=np.float64)
    out = apply_demodulated(x, modulate(block.w_qkv, s)).numpy()
    stds = out.std(axis=0)
    assert stds.min() > 0.97 and stds.max() < 1.03


def test_qkv_full_encoder_path_within_band():
    # full mod -> layernorm -> qkv -> demod path; layernorm couples channels
    # at ~1/C per column, so the band here is the acceptance band
    block, _ = make_block(c_in=256, hidden=256, c_out=256, n=256, w_dim=512)
    mapping = MappingNetwork(512, 512, RngStream(8, ("map",)), dtype=np.float64)
    rng = np.random.default_rng(3)
    cols = []
    for t in range(40):
        w = mapping(Tensor(rng.normal(size=512), dtype=np.float64))
        x = Tensor(rng.normal(size=(256, 256)), dtype=np.float64)
        capture = {}
        block(x, w, capture=capture)
        cols.append(capture["enc.qkv_demod"].numpy())
    stds = np.concatenate(cols, axis=0).std(axis=0)
    assert stds.min() > 0.95 and stds.max() < 1.05


def test_pre_activation_std_envelope():
    # attention branch contributes sqrt(sum A^2) per pixel, residual branch ~1
    block, _ = make_block(n=16)
    mapping = MappingNetwork(32, 32, RngStream(8, ("map",)), dtype=np.float64)
    rng = np.random.default_rng(6)
    outs, amax = [], 0.0
    for t in range(400):
        x = Tensor(rng.normal(size=(16, 64)), dtype=np.float64)
        w = mapping(Tensor(rng.normal(size=32), dtype=np.float64))
        capture = {}
        block(x, w, capture=capture)
        outs.append(capture["enc.pre_tail"].numpy())
        a = capture["enc.attention"].numpy()
        amax = max(amax, np.sqrt((a * a).sum(axis=-1)).max())
    stds = np.stack(outs).std(axis=0).mean(axis=1)  # per-pixel, pooled over channels
    assert stds.min() > 1.0 - 0.15
    assert stds.max() < 1.0 + amax + 0.15


# -- ablation structure ------------------------------------------------------------------


def test_baseline_matches_table_pattern():
    assert BASELINE.table_row() == {
        "style1": True,
        "style2": True,
        "style1=style2": False,
        "residual_a": False,
        "residual_b": False,
        "residual_c": True,
        "layernorm_a": False,
        "layernorm_b": False,
        "layernorm_c": True,
        "feed_forward": False,
    }


def test_pre_layernorm_graph_order():
    block, _ = make_block()
    order = block.stage_order()
    assert order.index("mod_input") < order.index("layernorm") < order.index("qkv")


def test_layernorm_variants_order():
    block_a, _ = make_block(VARIANT_PRESETS["layernorm-a"])
    oa = block_a.stage_order()
    assert oa.index("integrate") < oa.index("layernorm") < oa.index("activation")
    block_b, _ = make_block(VARIANT_PRESETS["layernorm-b"])
    ob = block_b.stage_order()
    assert ob.index("activation") < ob.index("layernorm")
    block_n, _ = make_block(VARIANT_PRESETS["layernorm-none"])
    assert "layernorm" not in block_n.stage_order()


def test_feed_forward_absent_by_default():
    block, _ = make_block()
    assert "feed_forward" not in block.stage_order()


def test_feed_forward_parameter_count():
    base, _ = make_block()
    ff, _ = make_block(VARIANT_PRESETS["feed-forward"])
    base_n = sum(p.size for p in base.named_parameters().values())
    ff_n = sum(p.size for p in ff.named_parameters().values())
    assert ff_n - base_n == 8 * 64 * 64


def test_feed_forward_zero_weights_is_identity():
    block, _ = make_block(VARIANT_PRESETS["feed-forward"])
    block.ff1.assign(np.zeros((64, 256)))
    block.ff2.assign(np.zeros((256, 64)))
    base, _ = make_block()
    x, w = sheet(), latent()
    np.testing.assert_allclose(block(x, w).numpy(), base(x, w).numpy(), atol=1e-12)


def test_residual_variants_change_output():
    x, w = sheet(), latent()
    outs = {}
    for name in ("baseline", "residual-a", "residual-b", "residual-none"):
        block, _ = make_block(VARIANT_PRESETS[name])
        outs[name] = block(x, w).numpy()
    names = list(outs)
    for i, a in enumerate(names):
        for b in names[i + 1 :]:
            assert not np.allclose(outs[a], outs[b])


def test_all_named_variants_run():
    x, w = sheet(), latent()
    for name, variant in VARIANT_PRESETS.items():
        block, _ = make_block(variant)
        out = block(x, w).numpy()
        assert out.shape == (16, 64) and np.isfinite(out).all(), name
    assert len(GRAD_CHECK_VARIANTS) == 5


def test_tied_style_requires_matching_dims():
    with pytest.raises(ValueError):
        make_block(VARIANT_PRESETS["style-tied"], c_in=32, hidden=64)


def test_identity_residual_requires_matching_dims():
    with pytest.raises(ValueError):
        make_block(VARIANT_PRESETS["residual-a"], c_in=64, c_out=32)


def test_shape_mismatch_raises():
    block, _ = make_block()
    with pytest.raises(ValueError):
        block(Tensor(np.zeros((16, 63)), dtype=np.float64), latent())


def test_nonfinite_input_identifies_stage():
    block, _ = make_block()
    x = np.zeros((16, 64))
    x[0, 0] = np.nan
    with pytest.raises(FloatingPointError, match="enc:input"):
        block(Tensor(x, dtype=np.float64), latent())


# -- low-rank path in the block ------------------------------------------------------------


def test_projector_shrinks_attention():
    proj = LinformerProjector(16, 4, RngStream(9, ("e",)), dtype=np.float64)
    block, _ = make_block(projector=proj)
    capture = {}
    block(sheet(), latent(), capture=capture)
    assert capture["enc.attention"].shape == (2, 16, 4)
    assert "project_kv" in block.stage_order()
