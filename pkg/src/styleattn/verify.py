"""Executable verification of the generator's mathematical claims.

Each check returns a VerificationReport pairing a measured quantity with its
expected value, provenance and tolerance. Checks are reproducible from
(seed, parameters) and run in double precision.

The checks:

* modulation_algebra  - exact row scaling + demod-coefficient oracle
* associativity       - [A(s*V)]W vs A[(s*V)W]
* qkv_demod_std       - unit-std inputs stay unit-std through mod+demod
* encoder_output_std  - per-pixel std of the integrated output tracks
                        sqrt(sum of squared attention row entries)
* sigma_decay         - Monte Carlo of the normality model for attention
                        rows: gamma concentration, Chebyshev bound, decay
* concentration       - Q/K demod prevents attention max-entry blow-up
* gradient            - analytic parameter grads vs central differences
* complexity          - quadratic vs linear attention cost accounting
* spectrum            - normalized cumulative singular-value curves
"""

import json
import time
from dataclasses import dataclass, field

import numpy as np

from .attention import (
    LinformerProjector,
    attention_map,
    attention_map_elements,
    attention_stage,
    full_attention_flops,
    linformer_attention_flops,
)
from .encoder import GRAD_CHECK_VARIANTS, VARIANT_PRESETS, EncoderBlock
from .generator import build, preset
from .styles import (
    MappingNetwork,
    StyleRegistry,
    apply_demodulated,
    modulate,
    residual_pixel_std,
)
from .substrate import RngStream, Tensor, count_ops, layer_norm, softmax_rows, svd_singular_values
from .substrate.tensor import matmul


@dataclass
class VerificationReport:
    check: str
    params: dict
    expected: object
    measured: object
    tolerance: object
    passed: bool
    details: dict = field(default_factory=dict)

    @property
    def verdict(self):
        return "pass" if self.passed else "fail"

    def to_dict(self):
        return {
            "check": self.check,
            "params": self.params,
            "expected": self.expected,
            "measured": self.measured,
            "tolerance": self.tolerance,
            "verdict": self.verdict,
            "details": self.details,
        }

    def to_json(self, **kwargs):
        return json.dumps(self.to_dict(), default=_jsonable, **kwargs)


def _jsonable(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(f"not JSON-serializable: {type(x)}")


@dataclass
class SpectrumCurve:
    """Normalized cumulative singular values; monotone, endpoint 1."""

    tag: str
    values: np.ndarray

    def to_csv(self):
        lines = ["index,value"]
        lines += [f"{i},{v:.12g}" for i, v in enumerate(self.values, start=1)]
        return "\n".join(lines) + "\n"


# -- modulation/demodulation algebra ------------------------------------------------


def check_modulation_algebra(instances=1000, seed=0):
    """Exact row scaling plus brute-force demod-coefficient oracle (<= 1e-12)."""
    rng = RngStream(seed, ("verify", "modulation"))
    worst = 0.0
    exact = True
    for _ in range(instances):
        rows = int(rng.integers(2, 24))
        cols = int(rng.integers(1, 16))
        w = rng.normal((rows, cols))
        s = rng.normal((rows,))
        mw = modulate(Tensor(w, dtype=np.float64), Tensor(s, dtype=np.float64))
        exact &= np.array_equal(mw.weight.numpy(), w * s[:, None])
        oracle = np.sqrt(((w * s[:, None]) ** 2).sum(axis=0))
        worst = max(worst, np.abs(mw.demod.numpy() - oracle).max())
    passed = exact and worst <= 1e-12
    return VerificationReport(
        "modulation-algebra",
        {"instances": instances, "seed": seed},
        expected={"row_scaling": "bit-exact", "demod_error": 0.0},
        measured={"row_scaling_exact": bool(exact), "max_demod_error": worst},
        tolerance=1e-12,
        passed=bool(passed),
    )


def check_associativity(instances=100, seed=0):
    """[A(s*V)]W == A[(s*V)W] within relative 1e-10."""
    rng = RngStream(seed, ("verify", "associativity"))
    worst = 0.0
    for _ in range(instances):
        n, c, k = (int(rng.integers(2, 16)) for _ in range(3))
        a = softmax_rows(Tensor(rng.normal((n, n)), dtype=np.float64))
        v = Tensor(rng.normal((n, c)), dtype=np.float64)
        s = Tensor(rng.normal((c,)), dtype=np.float64)
        w = Tensor(rng.normal((c, k)), dtype=np.float64)
        sv = v * s
        left = ((a @ sv) @ w).numpy()
        right = (a @ (sv @ w)).numpy()
        worst = max(worst, np.abs(left - right).max() / max(np.abs(left).max(), 1e-300))
    return VerificationReport(
        "associativity",
        {"instances": instances, "seed": seed},
        expected=0.0,
        measured={"max_relative_error": worst},
        tolerance=1e-10,
        passed=bool(worst <= 1e-10),
    )


# -- demodulation statistics ------------------------------------------------------------


def check_qkv_demod_std(trials=100_000, channels=64, qkv_width=192, style_std=1.0,
                        seed=0, demod_enabled=True):
    """Unit-std i.i.d. inputs through mod input -> Q/K/V linear -> demod.

    Per-column std must land in [0.95, 1.05]. With demod disabled the check
    is expected to fail once styles deviate from 1 (negative control).
    """
    rng = RngStream(seed, ("verify", "qkv-std"))
    x = Tensor(rng.normal((trials, channels)), dtype=np.float64)
    w = Tensor(rng.normal((channels, qkv_width)) / np.sqrt(channels), dtype=np.float64)
    s = Tensor(1.0 + style_std * rng.normal((channels,)), dtype=np.float64)
    mw = modulate(w, s)
    out = apply_demodulated(x, mw) if demod_enabled else matmul(x, mw.weight)
    stds = out.numpy().std(axis=0)
    lo, hi = float(stds.min()), float(stds.max())
    passed = lo >= 0.95 and hi <= 1.05
    return VerificationReport(
        "qkv-std",
        {"trials": trials, "channels": channels, "qkv_width": qkv_width,
         "style_std": style_std, "seed": seed, "demod_enabled": demod_enabled},
        expected=[0.95, 1.05],
        measured={"min_std": lo, "max_std": hi, "mean_std": float(stds.mean())},
        tolerance=0.05,
        passed=bool(passed),
    )


def check_encoder_output_std(trials=200, n=64, hidden=64, c_out=128, seed=0,
                             forced_attention=None):
    """Per-pixel std of the pre-residual integrated output vs sqrt(sum A^2).

    Runs a single-head block so the prediction is exactly the per-pixel
    attention row norm. Attention maps are captured per trial from real
    forwards; the value path is then driven with fresh unit-std values,
    which is the statistical assumption the derivation conditions on. The
    fully joint statistic (values and map from the same input) exceeds the
    prediction because the map is input-dependent - the reason the output
    demod excludes the attention term - and is reported as a detail, not
    asserted. forced_attention in {None, "uniform", "onehot"} replaces the
    captured map with the analytic extreme.
    """
    rng = RngStream(seed, ("verify", "encoder-std"))
    if forced_attention is not None:
        if forced_attention == "uniform":
            a = np.full((n, n), 1.0 / n)
        elif forced_attention == "onehot":
            a = np.eye(n)
        else:
            raise ValueError(f"unknown forced attention {forced_attention!r}")
        w_out = Tensor(rng.normal((hidden, c_out)) / np.sqrt(hidden), dtype=np.float64)
        s = Tensor(1.0 + 0.3 * rng.normal((hidden,)), dtype=np.float64)
        mw = modulate(w_out, s)
        pred = residual_pixel_std(a)
        samples = []
        a_t = Tensor(a, dtype=np.float64)
        for _ in range(trials):
            v = Tensor(rng.normal((n, hidden)), dtype=np.float64)
            out = matmul(matmul(a_t, v * s), w_out) / mw.demod
            samples.append(out.numpy())
        stds = np.stack(samples).std(axis=0).mean(axis=1)
        ratio = stds / pred
    else:
        registry = StyleRegistry(64, RngStream(seed, ("verify", "encoder-std", "styles")), dtype=np.float64)
        block = EncoderBlock("chk", n_pixels=n, c_in=hidden, hidden=hidden, c_out=c_out,
                             registry=registry,
                             seed_stream=RngStream(seed, ("verify", "encoder-std", "params")),
                             depth=hidden, dtype=np.float64)
        mapping = MappingNetwork(64, 64, RngStream(seed, ("verify", "encoder-std", "map")), dtype=np.float64)
        w_out = block.w_out.numpy()
        normalized, joint = [], []
        for _ in range(trials):
            x = Tensor(rng.normal((n, hidden)), dtype=np.float64)
            w_lat = mapping(Tensor(rng.normal((64,)), dtype=np.float64))
            capture = {}
            block(x, w_lat, capture=capture)
            a = capture["chk.attention"].numpy()[0]
            pred = residual_pixel_std(a)
            joint.append(capture["chk.integrated"].numpy() / pred[:, None])
            # unit-std value matrix under the captured map
            s_val = block.style_val(w_lat).values.numpy()
            sigma2 = np.sqrt(((w_out * s_val[:, None]) ** 2).sum(axis=0))
            y = (a @ (rng.normal((n, hidden)) * s_val) @ w_out) / sigma2
            normalized.append(y / pred[:, None])
        z = np.stack(normalized)  # (trials, n, c_out)
        ratio = z.transpose(1, 0, 2).reshape(n, -1).std(axis=1)
        zj = np.stack(joint)
        joint_ratio = zj.transpose(1, 0, 2).reshape(n, -1).std(axis=1)
        joint_dev = float(np.abs(joint_ratio - 1.0).mean())
    deviation = float(np.abs(ratio - 1.0).mean())
    details = {}
    if forced_attention is None:
        details["joint_sampling_deviation"] = joint_dev
        details["note"] = ("joint statistic exceeds the prediction because the map is "
                           "input-dependent; informational only")
    return VerificationReport(
        "encoder-output-std",
        {"trials": trials, "n": n, "hidden": hidden, "c_out": c_out, "seed": seed,
         "forced_attention": forced_attention},
        expected="per-pixel std == sqrt(sum A_l.^2)",
        measured={"mean_abs_relative_deviation": deviation,
                  "ratio_min": float(ratio.min()), "ratio_max": float(ratio.max())},
        tolerance=0.05,
        passed=bool(deviation < 0.05),
        details=details,
    )


# -- attention-row variance model -------------------------------------------------------


def check_sigma_decay(n_list=(16, 64, 256, 1024), trials=100_000, seed=0):
    """Monte Carlo of the normality model for attention rows.

    Rows are drawn i.i.d. N(1/n, 1/n^2) per entry; then sigma^2 = sum A^2 has
    mean 2/n, the centered sum concentrates per the Chebyshev bound
    Pr[|sum (A - 1/n)^2 - 1/n| <= 1/n] >= 1 - 2/n, and sigma decays with n.
    """
    rng = RngStream(seed, ("verify", "sigma-decay"))
    per_n = {}
    mean_sigmas = []
    all_pass = True
    for n in n_list:
        if n == 1:
            per_n[1] = {"mean_sigma": 1.0, "mean_sigma_sq": 1.0, "chebyshev_freq": 1.0}
            mean_sigmas.append(1.0)
            continue
        sig_sq_sum = 0.0
        sig_sum = 0.0
        hits = 0
        chunk = max(1, min(trials, 20_000_000 // n))
        done = 0
        while done < trials:
            take = min(chunk, trials - done)
            a = rng.normal((take, n)) / n + 1.0 / n
            sq = (a * a).sum(axis=1)
            centered = ((a - 1.0 / n) ** 2).sum(axis=1)
            sig_sq_sum += sq.sum()
            sig_sum += np.sqrt(sq).sum()
            hits += int((np.abs(centered - 1.0 / n) <= 1.0 / n).sum())
            done += take
        mean_sq = sig_sq_sum / trials
        freq = hits / trials
        bound = 1.0 - 2.0 / n
        slack = 3.0 * np.sqrt(max(bound * (1 - bound), 1e-12) / trials)
        mean_sigma = sig_sum / trials
        mean_sigmas.append(mean_sigma)
        ok_mean = abs(mean_sq - 2.0 / n) <= 0.1 * (2.0 / n)
        ok_bound = freq >= bound - slack
        all_pass &= ok_mean and ok_bound
        per_n[n] = {
            "mean_sigma_sq": mean_sq,
            "expected_sigma_sq": 2.0 / n,
            "chebyshev_freq": freq,
            "chebyshev_bound": bound,
            "bound_slack_3sigma": slack,
            "mean_sigma": mean_sigma,
        }
    decreasing = all(a > b for a, b in zip(mean_sigmas, mean_sigmas[1:]))
    all_pass &= decreasing
    return VerificationReport(
        "sigma-decay",
        {"n_list": list(n_list), "trials": trials, "seed": seed},
        expected={"mean_sigma_sq": "2/n (+-10%)", "chebyshev": ">= 1-2/n - 3sigma",
                  "sigma": "strictly decreasing in n"},
        measured={str(n): per_n[n] for n in n_list},
        tolerance=0.1,
        passed=bool(all_pass),
        details={"sigma_decreasing": decreasing},
    )


# -- attention concentration (Q/K demod) ----------------------------------------------------


def _max_entry_stat(n, channels, depth, scale, demod, stream):
    """Mean max-row-entry of the attention map for one random block."""
    x = stream.normal((n, channels))
    s = 1.0 + scale * stream.normal((channels,))
    # N(0, 1/fan) weights: unit column norms, so sigma ~= 1 uniformly at scale 0
    wq = stream.normal((channels, depth)) / np.sqrt(channels)
    wk = stream.normal((channels, depth)) / np.sqrt(channels)
    xm = Tensor(x * s, dtype=np.float64)
    h = layer_norm(xm) if channels >= 2 else xm
    q = matmul(h, Tensor(wq, dtype=np.float64))
    k = matmul(h, Tensor(wk, dtype=np.float64))
    if demod:
        q = q / Tensor(np.sqrt(((wq * s[:, None]) ** 2).sum(axis=0)), dtype=np.float64)
        k = k / Tensor(np.sqrt(((wk * s[:, None]) ** 2).sum(axis=0)), dtype=np.float64)
    a = attention_map(q, k).numpy()
    return float(a.max(axis=-1).mean())


def check_concentration(seeds=100, scale_levels=(0.0, 10.0), n=64, channels=64,
                        depth=32, seed=0, demod_enabled=True, bootstrap=10_000):
    """Without Q/K demod, large style scales concentrate attention.

    Passes when the mean max-entry without demod strictly exceeds the mean
    with demod at the largest scale level, at 95% bootstrap confidence, and
    the two are near-equal at scale 0. With demod_enabled=False the "on"
    side also skips demodulation, so the separation collapses and the check
    fails (negative control).
    """
    rng = RngStream(seed, ("verify", "concentration"))
    levels = {}
    passed = True
    for scale in scale_levels:
        on, off = [], []
        for i in range(seeds):
            stream_on = RngStream(seed, ("verify", "concentration", f"s{scale}", i))
            stream_off = RngStream(seed, ("verify", "concentration", f"s{scale}", i))
            on.append(_max_entry_stat(n, channels, depth, scale, demod_enabled, stream_on))
            off.append(_max_entry_stat(n, channels, depth, scale, False, stream_off))
        on, off = np.array(on), np.array(off)
        diff = off - on
        idx = rng.integers(0, seeds, (bootstrap, seeds))
        boot = diff[idx].mean(axis=1)
        ci_lo = float(np.quantile(boot, 0.025))
        levels[scale] = {
            "mean_max_entry_demod_on": float(on.mean()),
            "mean_max_entry_demod_off": float(off.mean()),
            "diff_ci95_low": ci_lo,
        }
        if scale == 0.0:
            rel = abs(on.mean() - off.mean()) / off.mean()
            levels[scale]["relative_gap"] = float(rel)
            passed &= rel < 0.1
        else:
            passed &= ci_lo > 0.0
    return VerificationReport(
        "concentration",
        {"seeds": seeds, "scale_levels": list(scale_levels), "n": n,
         "channels": channels, "depth": depth, "seed": seed,
         "demod_enabled": demod_enabled},
        expected="off-mean > on-mean at large style scale (95% bootstrap)",
        measured={str(k): v for k, v in levels.items()},
        tolerance="95% CI",
        passed=bool(passed),
    )


# -- gradient check ------------------------------------------------------------------------


def _symmetric_rel_err(ga, gfd):
    return abs(ga - gfd) / max(abs(ga), abs(gfd), 1e-4)


def gradient_check(variant="baseline", n=16, hidden=64, c_in=64, c_out=64, w_dim=32,
                   seed=0, step=1e-5, max_per_group=48):
    """Analytic parameter gradients vs central finite differences.

    Double precision, tiny instance. Small parameter groups are checked
    entirely; for large matrices a seeded sample of entries is checked (the
    FD oracle itself is untouched). Relative error uses a 1e-4 floor in the
    denominator so near-zero gradients are compared absolutely.

    When an entry disagrees at the base step, the step is refined (x0.1,
    x0.01): central differences straddling a leaky-ReLU kink average the two
    slopes and are not a valid derivative oracle there, while a genuine
    gradient bug disagrees at every step size. Refinements are counted in
    the report.
    """
    var = VARIANT_PRESETS[variant] if isinstance(variant, str) else variant
    registry = StyleRegistry(w_dim, RngStream(seed, ("gradcheck", "styles")), dtype=np.float64)
    block = EncoderBlock("gc", c_in, hidden, c_out, n, registry,
                         RngStream(seed, ("gradcheck", "params")),
                         variant=var, dtype=np.float64)
    mapping = MappingNetwork(w_dim, w_dim, RngStream(seed, ("gradcheck", "map")), dtype=np.float64)
    data = RngStream(seed, ("gradcheck", "data"))
    x = Tensor(data.normal((n, c_in)), dtype=np.float64)
    z = Tensor(data.normal((w_dim,)), dtype=np.float64)
    proj = Tensor(data.normal((n, c_out)), dtype=np.float64)

    params = dict(block.named_parameters())
    params.update(mapping.named_parameters())

    def loss_value():
        return (block(x, mapping(z)) * proj).sum()

    loss = loss_value()
    loss.backward()
    analytic = {name: (p.grad.copy() if p.grad is not None else np.zeros(p.shape))
                for name, p in params.items()}
    for p in params.values():
        p.zero_grad()

    picker = RngStream(seed, ("gradcheck", "sample"))
    worst = 0.0
    worst_name = None
    checked = 0
    refined = 0
    for name, p in params.items():
        size = p.size
        if size <= max_per_group:
            idxs = np.arange(size)
        else:
            idxs = np.unique(picker.integers(0, size, (max_per_group,)))
        base = p.data.copy().reshape(-1)
        for i in idxs:
            ga = analytic[name].reshape(-1)[i]
            err = None
            for h_scale in (1.0, 0.1, 0.01):
                h = step * h_scale * max(1.0, abs(base[i]))
                trial = base.copy()
                trial[i] = base[i] + h
                p.assign(trial.reshape(p.shape))
                up = loss_value().item()
                trial[i] = base[i] - h
                p.assign(trial.reshape(p.shape))
                down = loss_value().item()
                fd = (up - down) / (2 * h)
                err = _symmetric_rel_err(ga, fd)
                if err <= 1e-4:
                    break
                refined += 1
            checked += 1
            if err > worst:
                worst, worst_name = err, f"{name}[{i}]"
        p.assign(base.reshape(p.shape))
    return VerificationReport(
        "gradient",
        {"variant": variant if isinstance(variant, str) else "custom", "n": n,
         "hidden": hidden, "c_in": c_in, "c_out": c_out, "seed": seed,
         "step": step, "entries_checked": checked,
         "parameter_groups": len(params)},
        expected=0.0,
        measured={"max_relative_error": worst, "worst_entry": worst_name},
        tolerance=1e-4,
        passed=bool(worst <= 1e-4),
        details={"step_refinements": refined},
    )


def gradient_check_all_variants(seed=0, **kwargs):
    return [gradient_check(v, seed=seed, **kwargs) for v in GRAD_CHECK_VARIANTS]


# -- complexity accounting ---------------------------------------------------------------------


def _r_squared(x, y):
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    coeffs = np.polyfit(x, y, 1)
    resid = y - np.polyval(coeffs, x)
    ss_res = (resid**2).sum()
    ss_tot = ((y - y.mean()) ** 2).sum()
    return 1.0 - ss_res / ss_tot


def check_complexity(n_list=(256, 1024, 4096), k_lin=256, depth=32, seed=0):
    """Measured+analytic attention FLOPs: linear in n with projection,
    quadratic without; exact 4x attention-map reduction at n=1024, k=256."""
    rng = RngStream(seed, ("verify", "bench"))
    rows = []
    for n in n_list:
        q = Tensor(rng.normal((1, n, depth), dtype=np.float32))
        with count_ops() as c:
            attention_stage(q, q, q)
        t0 = time.perf_counter()
        attention_stage(q, q, q)
        full_time = time.perf_counter() - t0
        full = {"flops": c.flops, "peak_elements": c.peak_elements, "seconds": full_time}

        projector = LinformerProjector(n, k_lin, rng.child(f"E{n}"), dtype=np.float32)
        with count_ops() as c:
            attention_stage(q, q, q, projector=projector)
        t0 = time.perf_counter()
        attention_stage(q, q, q, projector=projector)
        lin_time = time.perf_counter() - t0
        lin = {"flops": c.flops, "peak_elements": c.peak_elements, "seconds": lin_time}

        rows.append({
            "n": n,
            "full": full,
            "linformer": lin,
            "analytic_full_flops": full_attention_flops(n, depth),
            "analytic_linformer_flops": linformer_attention_flops(n, k_lin, depth),
            "map_elements_full": attention_map_elements(n, n),
            "map_elements_linformer": attention_map_elements(n, k_lin),
        })

    ns = [r["n"] for r in rows]
    lin_flops = [r["linformer"]["flops"] for r in rows]
    full_flops = [r["full"]["flops"] for r in rows]
    r2_lin = _r_squared(ns, lin_flops)
    r2_full_quad = _r_squared([n * n for n in ns], full_flops)
    r2_full_lin = _r_squared(ns, full_flops)
    analytic_match = all(
        r["full"]["flops"] == r["analytic_full_flops"]
        and r["linformer"]["flops"] == r["analytic_linformer_flops"]
        for r in rows
    )
    at_1024 = next((r for r in rows if r["n"] == 1024), None)
    ratio = (at_1024["map_elements_full"] / at_1024["map_elements_linformer"]) if at_1024 else None
    ratio_ok = ratio == 4.0 if (at_1024 and k_lin == 256) else True
    passed = r2_lin >= 0.99 and r2_full_quad >= 0.99 and analytic_match and ratio_ok
    return VerificationReport(
        "complexity",
        {"n_list": list(n_list), "k_lin": k_lin, "depth": depth, "seed": seed},
        expected={"linformer_linear_r2": ">= 0.99", "full_quadratic_r2": ">= 0.99",
                  "map_reduction_at_1024": 4.0},
        measured={
            "linformer_linear_r2": float(r2_lin),
            "full_quadratic_r2": float(r2_full_quad),
            "full_linear_r2": float(r2_full_lin),
            "analytic_matches_counter": analytic_match,
            "map_reduction_at_1024": ratio,
        },
        tolerance=0.01,
        passed=bool(passed),
        details={"rows": rows, "wall_clock": "informational only"},
    )


# -- spectrum ---------------------------------------------------------------------------------


def cumulative_spectrum(matrix):
    """Normalized cumulative singular values of one attention map."""
    sv = svd_singular_values(matrix)
    total = sv.sum()
    if total == 0:
        return np.linspace(1.0 / len(sv), 1.0, len(sv))
    return np.cumsum(sv) / total


def attention_spectrum(generator, latents, stage, noise=None):
    """Average cumulative singular-value curve over latents (all blocks and
    heads at the stage)."""
    from .encoder import NOISE_OFF

    curves = []
    for z in latents:
        records = generator.export_attention(z, noise=noise or NOISE_OFF)
        for rec in records:
            if rec["stage"] != stage:
                continue
            tensors = rec["tensor"]
            for head in range(tensors.shape[0]):
                curves.append(cumulative_spectrum(tensors[head]))
    if not curves:
        raise ValueError(f"no attention maps at stage {stage}")
    avg = np.mean(np.stack(curves), axis=0)
    return SpectrumCurve(tag=f"stage{stage}", values=avg)


def check_spectrum(maps=100, seed=0):
    """Curve well-formedness on generated maps: monotone, endpoint 1 +- 1e-9.

    Low-rankness itself is a trained-model property and is not asserted.
    """
    g = build(preset("toy16"), seed=seed, dtype=np.float64)
    stream = RngStream(seed, ("verify", "spectrum"))
    curves = []
    count = 0
    while count < maps:
        records = g.export_attention(g.sample_z(stream))
        for rec in records:
            for head in range(rec["tensor"].shape[0]):
                curves.append(cumulative_spectrum(rec["tensor"][head]))
                count += 1
    monotone = all(np.all(np.diff(c) >= -1e-12) for c in curves)
    endpoints = np.array([c[-1] for c in curves])
    endpoint_err = float(np.abs(endpoints - 1.0).max())
    passed = monotone and endpoint_err <= 1e-9
    return VerificationReport(
        "spectrum",
        {"maps": len(curves), "seed": seed},
        expected={"monotone": True, "endpoint": 1.0},
        measured={"monotone": monotone, "max_endpoint_error": endpoint_err},
        tolerance=1e-9,
        passed=bool(passed),
    )


# -- structural bundle -------------------------------------------------------------------------


def check_structural(seed=0):
    """Preset shapes, output-skip linearity, determinism, mixing locality,
    and linformer==transformer below the activation threshold."""
    from .generator import PRESETS, GeneratorConfig
    from .substrate import bilinear_upsample_2x, flatten_grid, unflatten_sheet

    problems = []

    for name in PRESETS:
        cfg = preset(name)
        g = build(cfg, seed=seed)
        if g.num_style_slots <= 0 or g.parameter_count() <= 0:
            problems.append(f"{name}: empty build")

    g = build(preset("toy16"), seed=seed, dtype=np.float64)
    z = g.sample_z(RngStream(seed, ("structural", "z")))
    capture = {}
    img = g.synthesize(z, capture=capture).numpy()
    if not np.array_equal(img, g.synthesize(z).numpy()):
        problems.append("fixed-seed synthesis not reproducible")

    total = None
    for stage in g.stages:
        contrib = capture[f"stage{stage.index}.rgb"]
        for _ in range(len(g.stages) - 1 - stage.index):
            r = int(np.sqrt(contrib.shape[0]))
            contrib = flatten_grid(bilinear_upsample_2x(unflatten_sheet(contrib, r)))
        total = contrib if total is None else total + contrib
    skip = unflatten_sheet(total, g.config.target_resolution).numpy()
    rel = np.abs(skip - img).max() / max(np.abs(img).max(), 1e-300)
    if rel > 1e-10:
        problems.append(f"output-skip linearity violated: {rel:.2e}")

    z_arr = z.numpy()
    img_l = build(preset("toy16", mode="linformer"), seed=seed, dtype=np.float64).synthesize(
        Tensor(z_arr, dtype=np.float64)).numpy()
    if not np.array_equal(img, img_l):
        problems.append("linformer mode differs with projection inactive")

    cfg = GeneratorConfig(32, (1, 1, 1), (64, 64, 32), mode="hybrid", hybrid_cutoff=16,
                          z_dim=64, w_dim=64)
    gh = build(cfg, seed=seed, dtype=np.float64)
    w1 = gh.map_latent(gh.sample_z(RngStream(seed, ("structural", "w1"))))
    w2 = gh.map_latent(gh.sample_z(RngStream(seed, ("structural", "w2"))))
    cap_pure, cap_mixed = {}, {}
    gh.synthesize_with_styles(gh.broadcast_styles(w1), capture=cap_pure)
    gh.synthesize_with_styles(gh.styles_for_mixing(w1, w2, 16), capture=cap_mixed)
    for t in (0, 1):
        if not np.array_equal(cap_pure[f"stage{t}.sheet"].numpy(),
                              cap_mixed[f"stage{t}.sheet"].numpy()):
            problems.append(f"mixing locality violated at stage {t}")

    return VerificationReport(
        "structural",
        {"seed": seed},
        expected="all structural invariants hold",
        measured={"problems": problems},
        tolerance=None,
        passed=not problems,
    )


# -- suite ---------------------------------------------------------------------------------------


CHECKS = {
    "modulation-algebra": lambda seed, fast, demod: check_modulation_algebra(
        instances=200 if fast else 1000, seed=seed),
    "associativity": lambda seed, fast, demod: check_associativity(
        instances=50 if fast else 100, seed=seed),
    "qkv-std": lambda seed, fast, demod: check_qkv_demod_std(
        trials=20_000 if fast else 100_000, seed=seed, demod_enabled=demod,
        style_std=1.0 if demod else 2.0),
    "encoder-output-std": lambda seed, fast, demod: check_encoder_output_std(
        trials=60 if fast else 200, seed=seed),
    "sigma-decay": lambda seed, fast, demod: check_sigma_decay(
        trials=20_000 if fast else 100_000, seed=seed),
    "concentration": lambda seed, fast, demod: check_concentration(
        seeds=30 if fast else 100, seed=seed, demod_enabled=demod),
    "gradient": lambda seed, fast, demod: gradient_check(
        "baseline", seed=seed, max_per_group=12 if fast else 48),
    "complexity": lambda seed, fast, demod: check_complexity(
        n_list=(256, 1024) if fast else (256, 1024, 4096), seed=seed),
    "spectrum": lambda seed, fast, demod: check_spectrum(
        maps=30 if fast else 100, seed=seed),
    "structural": lambda seed, fast, demod: check_structural(seed=seed),
}


def run_checks(names=None, seed=0, fast=False, demod_enabled=True):
    """Run selected checks (all by default); returns reports in order."""
    names = list(CHECKS) if names is None else list(names)
    if not names:
        raise ValueError("no checks selected")
    unknown = [n for n in names if n not in CHECKS]
    if unknown:
        raise KeyError(f"unknown checks: {unknown}; available: {sorted(CHECKS)}")
    return [CHECKS[name](seed, fast, demod_enabled) for name in names]
