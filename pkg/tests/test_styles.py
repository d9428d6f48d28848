import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from styleattn.substrate import RngStream, Tensor, softmax_rows
from styleattn.styles import (
    DEMOD_FLOOR,
    ROLE_INPUT,
    ROLE_VALUE,
    MappingNetwork,
    StyleRegistry,
    StyleVector,
    apply_demodulated,
    modulate,
    output_demod_coeffs,
    residual_pixel_std,
)


def brute_force_sigma(w_mod):
    # independent oracle: per-column sqrt of explicit python-loop sum
    rows, cols = w_mod.shape
    out = np.zeros(cols)
    for j in range(cols):
        acc = 0.0
        for i in range(rows):
            acc += w_mod[i, j] * w_mod[i, j]
        out[j] = np.sqrt(acc)
    return out


# -- mapping network -----------------------------------------------------------


def test_mapping_zero_weights_zero_output():
    m = MappingNetwork(4, 4, RngStream(0, ("t",)), dtype=np.float64)
    for p in m.named_parameters().values():
        p.assign(np.zeros(p.shape))
    out = m(Tensor(np.ones(4), dtype=np.float64))
    np.testing.assert_array_equal(out.numpy(), np.zeros(4))


def test_mapping_identity_path_hand_evaluated():
    m = MappingNetwork(2, 2, RngStream(0, ("t",)), dtype=np.float64)
    m.w1.assign(np.eye(2))
    m.b1.assign(np.zeros(2))
    m.w2.assign(np.eye(2))
    m.b2.assign(np.zeros(2))
    out = m(Tensor([1.0, -2.0], dtype=np.float64)).numpy()
    # lrelu([1, -2]) = [1, -0.4], then identity
    np.testing.assert_allclose(out, [1.0, -0.4], atol=1e-15)


def test_mapping_depth_is_two():
    m = MappingNetwork(8, 8, RngStream(3, ("t",)))
    assert len(m.weight_matrices()) == 2


def test_mapping_dimension_mismatch():
    m = MappingNetwork(8, 8, RngStream(3, ("t",)))
    with pytest.raises(ValueError):
        m(Tensor(np.zeros(5), dtype=np.float32))


# -- style affines ---------------------------------------------------------------


def test_affine_fresh_init_is_ones_at_zero_latent():
    reg = StyleRegistry(16, RngStream(5, ("styles",)), dtype=np.float64)
    reg.register("enc0.input", 12, ROLE_INPUT)
    s = reg.affine_style(Tensor(np.zeros(16), dtype=np.float64), "enc0.input")
    np.testing.assert_allclose(s.values.numpy(), np.ones(12), atol=1e-12)


def test_affine_constant_bias():
    reg = StyleRegistry(4, RngStream(5, ("styles",)), dtype=np.float64)
    aff = reg.register("x", 2, ROLE_VALUE)
    aff.weight.assign(np.zeros((4, 2)))
    aff.bias.assign([2.0, 3.0])
    s = reg.affine_style(Tensor([9.0, -1.0, 0.5, 2.0], dtype=np.float64), "x")
    np.testing.assert_array_equal(s.values.numpy(), [2.0, 3.0])


def test_affines_are_independent_per_layer_id():
    reg = StyleRegistry(8, RngStream(5, ("styles",)), dtype=np.float64)
    a = reg.register("a", 6, ROLE_INPUT)
    b = reg.register("b", 6, ROLE_INPUT)
    assert a.weight is not b.weight
    assert not np.array_equal(a.weight.numpy(), b.weight.numpy())


def test_unregistered_layer_id_raises():
    reg = StyleRegistry(8, RngStream(5, ("styles",)))
    with pytest.raises(KeyError):
        reg.affine_style(Tensor(np.zeros(8), dtype=np.float32), "nope")


def test_duplicate_registration_raises():
    reg = StyleRegistry(8, RngStream(5, ("styles",)))
    reg.register("a", 6, ROLE_INPUT)
    with pytest.raises(ValueError):
        reg.register("a", 6, ROLE_INPUT)


# -- modulation / demodulation ------------------------------------------------------


def test_modulate_identity_style():
    rng = np.random.default_rng(0)
    w = rng.normal(size=(6, 3))
    mw = modulate(Tensor(w, dtype=np.float64), Tensor(np.ones(6), dtype=np.float64))
    assert np.array_equal(mw.weight.numpy(), w)
    np.testing.assert_allclose(mw.demod.numpy(), np.linalg.norm(w, axis=0), atol=1e-12)


def test_modulate_pythagorean_column():
    mw = modulate(Tensor([[3.0], [4.0]], dtype=np.float64), Tensor([1.0, 1.0], dtype=np.float64))
    np.testing.assert_allclose(mw.demod.numpy(), [5.0], atol=1e-12)


def test_modulate_row_scaling_bit_exact():
    rng = np.random.default_rng(1)
    w = rng.normal(size=(8, 4))
    s = rng.normal(size=8)
    mw = modulate(Tensor(w, dtype=np.float64), Tensor(s, dtype=np.float64))
    manual = np.empty_like(w)
    for i in range(8):
        for j in range(4):
            manual[i, j] = s[i] * w[i, j]
    assert np.array_equal(mw.weight.numpy(), manual)


def test_demod_matches_brute_force_oracle():
    rng = np.random.default_rng(2)
    for _ in range(20):
        w = rng.normal(size=(8, 4))
        s = rng.normal(size=8)
        mw = modulate(Tensor(w, dtype=np.float64), Tensor(s, dtype=np.float64))
        expected = brute_force_sigma(s[:, None] * w)
        np.testing.assert_allclose(mw.demod.numpy(), expected, atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 10), st.integers(1, 6))
def test_modulate_exactness_property(seed, rows, cols):
    rng = np.random.default_rng(seed)
    w = rng.normal(size=(rows, cols))
    s = rng.normal(size=rows)
    mw = modulate(Tensor(w, dtype=np.float64), Tensor(s, dtype=np.float64))
    assert np.array_equal(mw.weight.numpy(), w * s[:, None])


def test_style_length_mismatch():
    with pytest.raises(ValueError):
        modulate(Tensor(np.ones((4, 2)), dtype=np.float64), Tensor(np.ones(3), dtype=np.float64))


def test_apply_demodulated_unit_std_monte_carlo():
    rng = np.random.default_rng(3)
    x = Tensor(rng.normal(size=(100_000, 16)), dtype=np.float64)
    w = Tensor(rng.normal(size=(16, 8)), dtype=np.float64)
    s = Tensor(rng.normal(size=16) * 0.5 + 1.0, dtype=np.float64)
    out = apply_demodulated(x, modulate(w, s)).numpy()
    stds = out.std(axis=0)
    assert np.all(stds > 0.97) and np.all(stds < 1.03)


def test_zero_column_divides_cleanly():
    w = np.ones((4, 3))
    w[:, 1] = 0.0
    mw = modulate(Tensor(w, dtype=np.float64), Tensor(np.ones(4), dtype=np.float64))
    assert mw.demod.numpy()[1] >= DEMOD_FLOOR
    out = apply_demodulated(Tensor(np.ones((5, 4)), dtype=np.float64), mw).numpy()
    assert np.all(np.isfinite(out))
    np.testing.assert_array_equal(out[:, 1], np.zeros(5))


def test_modulation_route_equivalence():
    # modulate-then-multiply vs scale-activations-then-plain-weight
    rng = np.random.default_rng(4)
    x = rng.normal(size=(10, 6))
    w = rng.normal(size=(6, 5))
    s = rng.normal(size=6)
    mw = modulate(Tensor(w, dtype=np.float64), Tensor(s, dtype=np.float64))
    route_w = (Tensor(x, dtype=np.float64) @ mw.weight).numpy()
    route_a = ((Tensor(x * s, dtype=np.float64)) @ Tensor(w, dtype=np.float64)).numpy()
    rel = np.abs(route_w - route_a).max() / np.abs(route_w).max()
    assert rel < 1e-10


def test_attention_value_associativity_identity():
    # [A(s*V)]W == A[(s*V)W] to float-associativity error
    rng = np.random.default_rng(6)
    for _ in range(25):
        a = softmax_rows(Tensor(rng.normal(size=(7, 7)), dtype=np.float64))
        v = Tensor(rng.normal(size=(7, 5)), dtype=np.float64)
        s = Tensor(rng.normal(size=5), dtype=np.float64)
        w = Tensor(rng.normal(size=(5, 4)), dtype=np.float64)
        sv = v * s
        left = ((a @ sv) @ w).numpy()
        right = (a @ (sv @ w)).numpy()
        rel = np.abs(left - right).max() / max(np.abs(left).max(), 1e-30)
        assert rel < 1e-10


# -- encoder-output demod coefficients ----------------------------------------------


def test_output_demod_identity():
    mw = modulate(
        Tensor(np.eye(4), dtype=np.float64),
        StyleVector(Tensor(np.ones(4), dtype=np.float64), ROLE_VALUE),
    )
    np.testing.assert_allclose(output_demod_coeffs(mw).numpy(), np.ones(4), atol=1e-12)


def test_output_demod_requires_value_role():
    mw = modulate(
        Tensor(np.eye(4), dtype=np.float64),
        StyleVector(Tensor(np.ones(4), dtype=np.float64), ROLE_INPUT),
    )
    with pytest.raises(ValueError):
        output_demod_coeffs(mw)


def test_residual_std_uniform_attention():
    n = 64
    a = np.full((n, n), 1.0 / n)
    np.testing.assert_allclose(residual_pixel_std(a), np.full(n, 1.0 / np.sqrt(n)), atol=1e-12)


def test_residual_std_one_hot_attention():
    a = np.eye(16)
    np.testing.assert_allclose(residual_pixel_std(a), np.ones(16), atol=1e-12)
