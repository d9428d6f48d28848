"""Acceptance gate: one test per criterion, each printing a pass/fail line.

Run with `pytest tests/test_acceptance.py -v -s`. Tolerances are pinned
here, not configurable. The toy-training criterion takes a few minutes; the
rest complete in seconds.
"""

import time

import numpy as np

from styleattn import verify
from styleattn.encoder import GRAD_CHECK_VARIANTS
from styleattn.generator import PRESETS, build, preset
from styleattn.imageio import to_uint8
from styleattn.substrate import RngStream, Tensor
from styleattn.training import ToyTrainConfig, ToyTrainer


def record(num, name, passed, detail=""):
    status = "PASS" if passed else "FAIL"
    print(f"\nACCEPTANCE {num:2d} [{name}]: {status}  {detail}")
    assert passed, f"criterion {num} ({name}) failed: {detail}"


def test_criterion_1_modulation_demodulation_algebra():
    t0 = time.time()
    r = verify.check_modulation_algebra(instances=1000, seed=11)
    detail = (f"exact scaling={r.measured['row_scaling_exact']}, "
              f"max demod err={r.measured['max_demod_error']:.2e}, {time.time()-t0:.1f}s")
    record(1, "eq5/eq6 algebra", r.passed and time.time() - t0 < 10, detail)


def test_criterion_2_associativity_identity():
    t0 = time.time()
    r = verify.check_associativity(instances=100, seed=12)
    detail = f"max rel err={r.measured['max_relative_error']:.2e}, {time.time()-t0:.1f}s"
    record(2, "attention/value associativity", r.passed and time.time() - t0 < 5, detail)


def test_criterion_3_demodulated_standard_deviations():
    t0 = time.time()
    r_qkv = verify.check_qkv_demod_std(trials=100_000, seed=13)
    r_enc = verify.check_encoder_output_std(trials=200, seed=13)
    detail = (f"qkv std in [{r_qkv.measured['min_std']:.3f}, {r_qkv.measured['max_std']:.3f}], "
              f"encoder-output deviation={r_enc.measured['mean_abs_relative_deviation']:.3%}, "
              f"{time.time()-t0:.1f}s")
    record(3, "unit-std demodulation", r_qkv.passed and r_enc.passed and time.time() - t0 < 120,
           detail)


def test_criterion_4_attention_row_variance_model():
    t0 = time.time()
    r = verify.check_sigma_decay(n_list=(16, 64, 256, 1024), trials=100_000, seed=14)
    freqs = {n: round(r.measured[str(n)]["chebyshev_freq"], 5) for n in (16, 64, 256, 1024)}
    detail = f"chebyshev freqs={freqs}, decreasing={r.details['sigma_decreasing']}, {time.time()-t0:.1f}s"
    record(4, "sigma decay monte carlo", r.passed and time.time() - t0 < 60, detail)


def test_criterion_5_qk_demod_concentration():
    t0 = time.time()
    r = verify.check_concentration(seeds=100, scale_levels=(0.0, 10.0), seed=15)
    lvl = r.measured["10.0"]
    detail = (f"off={lvl['mean_max_entry_demod_off']:.4f} > on={lvl['mean_max_entry_demod_on']:.4f}, "
              f"CI low={lvl['diff_ci95_low']:.4f}, {time.time()-t0:.1f}s")
    record(5, "attention concentration", r.passed and time.time() - t0 < 120, detail)


def test_criterion_6_gradients_all_variants():
    t0 = time.time()
    worst = 0.0
    all_pass = True
    for variant in GRAD_CHECK_VARIANTS:
        r = verify.gradient_check(variant, n=16, hidden=64, seed=16)
        worst = max(worst, r.measured["max_relative_error"])
        all_pass &= r.passed
    detail = f"{len(GRAD_CHECK_VARIANTS)} variants, worst rel err={worst:.2e}, {time.time()-t0:.1f}s"
    record(6, "gradient check", all_pass and worst <= 1e-4 and time.time() - t0 < 300, detail)


def test_criterion_7_linear_attention_complexity():
    t0 = time.time()
    r = verify.check_complexity(n_list=(256, 1024, 4096), k_lin=256, seed=17)
    detail = (f"linear R2={r.measured['linformer_linear_r2']:.4f}, "
              f"quadratic R2={r.measured['full_quadratic_r2']:.4f}, "
              f"map reduction={r.measured['map_reduction_at_1024']}x, {time.time()-t0:.1f}s")
    record(7, "complexity accounting", r.passed and time.time() - t0 < 60, detail)


def test_criterion_8_structure_and_reproducibility():
    t0 = time.time()
    problems = []

    documented = {
        "cifar10": (32, (1, 3, 3), (1024, 512, 512)),
        "stl10": (48, (1, 2, 2), (1024, 256, 64)),
        "celeba": (64, (1, 2, 1, 1), (1024, 256, 64, 64)),
        "celeba-lin": (64, (1, 2, 1, 1), (1024, 256, 64, 64)),
        "church-lin": (128, (1, 2, 1, 1, 1), (1024, 256, 64, 64, 64)),
        "clevr-hybrid": (256, (1, 2, 1, 1, 1, 1), (1024, 256, 256, 256, 256, 128)),
        "cityscapes-hybrid": (256, (1, 2, 1, 1, 1, 1), (1024, 256, 256, 256, 256, 128)),
        "afhq-cat-hybrid": (512, (1, 2, 1, 1, 1, 1, 1), (1024, 256, 256, 256, 256, 64, 32)),
    }
    for name, (target, layers, hidden) in documented.items():
        cfg = preset(name)
        if (cfg.target_resolution, cfg.layers, cfg.hidden) != (target, layers, hidden):
            problems.append(f"{name}: config mismatch")
        g = build(cfg, seed=1)
        expect = tuple((r * r, h) for r, h in zip(cfg.resolutions(), cfg.hidden))
        if cfg.sheet_shapes() != expect:
            problems.append(f"{name}: sheet shapes")
    for name in PRESETS:
        build(preset(name), seed=1)

    # byte-identical fixed-seed generation
    g = build(preset("toy16"), seed=8, dtype=np.float64)
    z = g.sample_z(RngStream(8, ("acc", "z")))
    png1 = to_uint8(g.synthesize(z)).tobytes()
    png2 = to_uint8(g.synthesize(z)).tobytes()
    if png1 != png2:
        problems.append("fixed-seed generation not byte-identical")

    r = verify.check_structural(seed=18)
    problems += r.measured["problems"]

    detail = f"{len(documented)} documented presets, {problems or 'no problems'}, {time.time()-t0:.1f}s"
    record(8, "structure/reproducibility", not problems and time.time() - t0 < 120, detail)


def test_criterion_9_spectrum_tooling():
    t0 = time.time()
    r = verify.check_spectrum(maps=100, seed=19)
    detail = (f"{r.params['maps']} maps, monotone={r.measured['monotone']}, "
              f"endpoint err={r.measured['max_endpoint_error']:.1e}, {time.time()-t0:.1f}s")
    record(9, "spectrum curves", r.passed and time.time() - t0 < 60, detail)


def test_criterion_10_toy_training(tmp_path):
    t0 = time.time()
    ratios = []
    finite = True
    for seed in (0, 1, 2):
        trainer = ToyTrainer(ToyTrainConfig(seed=seed))
        before = trainer.moment_distance(256)["mean_distance"]
        trainer.train(2000)
        after = trainer.moment_distance(256)["mean_distance"]
        finite &= all(np.isfinite(d) and np.isfinite(g) for d, g in trainer.loss_history)
        ratios.append(after / before)
        if seed == 0:
            path = tmp_path / "acc_ckpt.bin"
            trainer.save_checkpoint(path)
            restored = ToyTrainer(ToyTrainConfig(seed=0)).load_checkpoint(path)
            a = [trainer.train_step() for _ in range(3)]
            b = [restored.train_step() for _ in range(3)]
            if a != b:
                finite = False
    shrunk = sum(r <= 0.5 for r in ratios)
    elapsed = time.time() - t0
    detail = f"ratios={[round(r, 3) for r in ratios]}, {shrunk}/3 seeds shrank >=50%, {elapsed/60:.1f}min"
    record(10, "toy adversarial training", finite and shrunk >= 2 and elapsed < 1800, detail)
