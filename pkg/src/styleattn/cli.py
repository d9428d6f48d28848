"""Command-line surface.

    styleattn generate  --preset cifar10 --seed 7 --count 4 --out run/
    styleattn verify    --checks qkv-std,gradient --seed 0 --out run/
    styleattn mix       --preset clevr-hybrid --row-seeds 1,2,3 --col-seeds 4,5,6
    styleattn ablate    --variant layernorm-a --seed 0 --out run/
    styleattn bench     --n 256,1024,4096 --out run/
    styleattn train-toy --steps 2000 --seed 0 --out run/
    styleattn spectrum  --preset toy16 --stage 1 --latents 16 --out run/
    styleattn attn-dump --preset toy16 --query-pixel 12 --out run/

Every command persists its resolved configuration as run_config.json in the
output directory; re-running from the same configuration reproduces outputs
byte-identically in deterministic mode. Exit codes: 0 success / all checks
pass, 1 check failure, 2 configuration error.
"""

import argparse
import dataclasses
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from . import verify
from .encoder import VARIANT_PRESETS, NoiseSpec
from .generator import GeneratorConfig, PRESETS, build, preset
from .imageio import heatmap_png, image_grid, save_png, save_raw, to_uint8
from .substrate import RngStream, Tensor
from .training import ToyTrainConfig, ToyTrainer

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG_ERROR = 2


class ConfigError(Exception):
    pass


def _config_to_dict(cfg):
    d = dataclasses.asdict(cfg)
    d["variant"] = dataclasses.asdict(cfg.variant)
    return d


def _generator_config(args):
    """Resolve --preset/--config plus overrides into a GeneratorConfig."""
    if getattr(args, "config", None):
        raw = json.loads(Path(args.config).read_text())
        gen = raw.get("generator", raw)
        if "variant" in gen and isinstance(gen["variant"], dict):
            from .encoder import AblationVariant

            gen["variant"] = AblationVariant(**gen["variant"])
        for key in ("layers", "hidden"):
            if key in gen:
                gen[key] = tuple(gen[key])
        try:
            return GeneratorConfig(**gen)
        except (TypeError, ValueError) as e:
            raise ConfigError(f"bad generator config: {e}") from e
    name = getattr(args, "preset", None) or "cifar10"
    try:
        cfg = preset(name)
    except KeyError as e:
        raise ConfigError(str(e)) from e
    if getattr(args, "variant", None):
        if args.variant not in VARIANT_PRESETS:
            raise ConfigError(f"unknown variant {args.variant!r}; available: {sorted(VARIANT_PRESETS)}")
        cfg = dataclasses.replace(cfg, variant=VARIANT_PRESETS[args.variant])
    return cfg


def _dtype(args):
    return np.float64 if args.precision == "double" else np.float32


def _out_dir(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _persist_run_config(out, command, args, extra=None):
    payload = {
        "command": command,
        "seed": args.seed,
        "precision": args.precision,
        **{k: v for k, v in vars(args).items()
           if k not in ("func", "command") and not k.startswith("_")},
    }
    if extra:
        payload.update(extra)
    blob = json.dumps(payload, indent=2, sort_keys=True, default=str)
    (out / "run_config.json").write_text(blob + "\n")
    return hashlib.sha256(blob.encode()).hexdigest()


# -- commands -----------------------------------------------------------------------


def cmd_generate(args):
    out = _out_dir(args)
    cfg = _generator_config(args)
    g = build(cfg, seed=args.seed, dtype=_dtype(args))
    config_hash = _persist_run_config(out, "generate", args, {"generator": _config_to_dict(cfg)})
    stream = RngStream(args.seed, ("generate", "z"))
    noise = NoiseSpec(args.noise, seed=args.seed)
    manifest = {"config_hash": config_hash, "images": []}
    for i in range(args.count):
        z = g.sample_z(stream)
        img = g.synthesize(z, noise=noise)
        name = f"image_{i:03d}.png"
        save_png(img, out / name)
        if args.dump_raw:
            save_raw(img, out / f"image_{i:03d}.raw")
        manifest["images"].append({"file": name, "index": i, "seed": args.seed})
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    print(f"wrote {args.count} images at {cfg.target_resolution}x{cfg.target_resolution} to {out}")
    return EXIT_OK


def cmd_verify(args):
    out = _out_dir(args)
    names = None
    if args.checks is not None:
        names = [c for c in args.checks.split(",") if c]
        if not names:
            raise ConfigError("no checks selected")
    try:
        reports = verify.run_checks(names, seed=args.seed, fast=args.fast,
                                    demod_enabled=not args.disable_demod)
    except KeyError as e:
        raise ConfigError(str(e)) from e
    _persist_run_config(out, "verify", args)
    bundle = [r.to_dict() for r in reports]
    (out / "reports.json").write_text(
        json.dumps(bundle, indent=2, default=verify._jsonable) + "\n")
    failed = [r.check for r in reports if not r.passed]
    for r in reports:
        print(f"[{r.verdict:4s}] {r.check}")
    if failed:
        print(f"failed checks: {', '.join(failed)}")
        return EXIT_CHECK_FAILED
    print(f"all {len(reports)} checks passed; reports in {out/'reports.json'}")
    return EXIT_OK


def cmd_mix(args):
    out = _out_dir(args)
    cfg = _generator_config(args)
    g = build(cfg, seed=args.seed, dtype=_dtype(args))
    resolutions = cfg.resolutions()
    if args.cutoff not in resolutions:
        raise ConfigError(f"cutoff {args.cutoff} not in schedule {resolutions}")
    _persist_run_config(out, "mix", args, {"generator": _config_to_dict(cfg)})
    row_seeds = [int(s) for s in args.row_seeds.split(",")]
    col_seeds = [int(s) for s in args.col_seeds.split(",")]
    noise = NoiseSpec("none")

    def w_for(seed):
        z = Tensor(RngStream(seed, ("mix", "z")).normal((cfg.z_dim,)), dtype=g.dtype)
        return g.map_latent(z)

    row_ws = [w_for(s) for s in row_seeds]
    col_ws = [w_for(s) for s in col_seeds]
    rows, cols = len(row_ws), len(col_ws)
    cells = [None] * ((rows + 1) * (cols + 1))
    for j, w in enumerate(col_ws):
        cells[j + 1] = to_uint8(g.synthesize_with_styles(g.broadcast_styles(w), noise))
    for i, w in enumerate(row_ws):
        cells[(i + 1) * (cols + 1)] = to_uint8(g.synthesize_with_styles(g.broadcast_styles(w), noise))
    for i, w_low in enumerate(row_ws):
        for j, w_high in enumerate(col_ws):
            ws = g.styles_for_mixing(w_low, w_high, args.cutoff)
            cells[(i + 1) * (cols + 1) + j + 1] = to_uint8(g.synthesize_with_styles(ws, noise))
    grid = image_grid(cells, rows + 1, cols + 1)
    save_png(grid, out / "mixing_grid.png")
    print(f"wrote {rows+1}x{cols+1} mixing grid (cutoff {args.cutoff}) to {out/'mixing_grid.png'}")
    return EXIT_OK


def cmd_ablate(args):
    out = _out_dir(args)
    if args.variant not in VARIANT_PRESETS:
        raise ConfigError(f"unknown variant {args.variant!r}; available: {sorted(VARIANT_PRESETS)}")
    _persist_run_config(out, "ablate", args)
    variant_cfg = dataclasses.replace(preset("toy8"), variant=VARIANT_PRESETS[args.variant])
    config_hash = hashlib.sha256(
        json.dumps(_config_to_dict(variant_cfg), sort_keys=True).encode()).hexdigest()
    default_hash = hashlib.sha256(
        json.dumps(_config_to_dict(preset("toy8")), sort_keys=True).encode()).hexdigest()
    report = verify.gradient_check(args.variant, seed=args.seed,
                                   max_per_group=12 if args.fast else 48)
    results = {
        "variant": args.variant,
        "config_hash": config_hash,
        "config_matches_default_build": config_hash == default_hash,
        "gradient": report.to_dict(),
    }
    steps = args.steps
    if steps > 0:
        trainer = ToyTrainer(ToyTrainConfig(generator=variant_cfg, seed=args.seed))
        before = trainer.moment_distance(128)
        last = trainer.train(steps)
        after = trainer.moment_distance(128)
        results["training"] = {"steps": steps, "final_losses": last,
                               "moments_before": before, "moments_after": after}
    (out / "ablate.json").write_text(json.dumps(results, indent=2, default=verify._jsonable) + "\n")
    ok = report.passed
    print(f"ablate {args.variant}: gradient {report.verdict}"
          + (f", trained {steps} steps" if steps else ""))
    return EXIT_OK if ok else EXIT_CHECK_FAILED


def cmd_bench(args):
    out = _out_dir(args)
    n_list = tuple(int(s) for s in args.n.split(","))
    _persist_run_config(out, "bench", args)
    report = verify.check_complexity(n_list=n_list, k_lin=args.k, seed=args.seed)
    (out / "bench.json").write_text(report.to_json(indent=2) + "\n")
    lines = ["n,full_flops,linformer_flops,full_map_elements,linformer_map_elements,"
             "full_seconds,linformer_seconds"]
    for row in report.details["rows"]:
        lines.append(
            f"{row['n']},{row['full']['flops']},{row['linformer']['flops']},"
            f"{row['map_elements_full']},{row['map_elements_linformer']},"
            f"{row['full']['seconds']:.6f},{row['linformer']['seconds']:.6f}")
    (out / "bench.csv").write_text("\n".join(lines) + "\n")
    print(f"bench {report.verdict}: linear R2 "
          f"{report.measured['linformer_linear_r2']:.4f}, quadratic R2 "
          f"{report.measured['full_quadratic_r2']:.4f}; CSV in {out/'bench.csv'}")
    return EXIT_OK if report.passed else EXIT_CHECK_FAILED


def cmd_train_toy(args):
    out = _out_dir(args)
    gen_cfg = preset(args.preset) if args.preset else preset("toy8")
    cfg = ToyTrainConfig(generator=gen_cfg, seed=args.seed, batch=args.batch,
                         r1_gamma=args.r1_gamma)
    _persist_run_config(out, "train-toy", args, {"generator": _config_to_dict(gen_cfg)})
    trainer = ToyTrainer(cfg, dtype=_dtype(args))
    before = trainer.moment_distance(256)
    trainer.train(args.steps, log_every=args.log_every)
    after = trainer.moment_distance(256)
    trainer.save_checkpoint(out / "checkpoint.bin")
    lines = ["step,loss_d,loss_g"]
    lines += [f"{i+1},{d:.9g},{g:.9g}" for i, (d, g) in enumerate(trainer.loss_history)]
    (out / "metrics.csv").write_text("\n".join(lines) + "\n")
    summary = {"steps": args.steps, "moments_before": before, "moments_after": after,
               "mean_distance_ratio": after["mean_distance"] / before["mean_distance"]}
    (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    samples = trainer.sample_images(9)
    grid = image_grid([to_uint8(s) for s in samples], 3, 3)
    save_png(grid, out / "samples.png")
    print(f"trained {args.steps} steps; mean distance "
          f"{before['mean_distance']:.3f} -> {after['mean_distance']:.3f}; "
          f"checkpoint + metrics in {out}")
    return EXIT_OK


def cmd_spectrum(args):
    out = _out_dir(args)
    cfg = _generator_config(args)
    g = build(cfg, seed=args.seed, dtype=np.float64)
    _persist_run_config(out, "spectrum", args, {"generator": _config_to_dict(cfg)})
    stream = RngStream(args.seed, ("spectrum", "z"))
    latents = [g.sample_z(stream) for _ in range(args.latents)]
    curve = verify.attention_spectrum(g, latents, stage=args.stage)
    path = out / f"spectrum_stage{args.stage}.csv"
    path.write_text(curve.to_csv())
    print(f"wrote averaged cumulative singular-value curve ({len(curve.values)} points) to {path}")
    return EXIT_OK


def cmd_attn_dump(args):
    out = _out_dir(args)
    cfg = _generator_config(args)
    g = build(cfg, seed=args.seed, dtype=_dtype(args))
    _persist_run_config(out, "attn-dump", args, {"generator": _config_to_dict(cfg)})
    z = g.sample_z(RngStream(args.seed, ("attn", "z")))
    records = g.export_attention(z)
    if not records:
        raise ConfigError("generator has no encoder stages to dump attention from")
    wrote = 0
    for rec in records:
        tensor = rec["tensor"]
        heads, n, m = tensor.shape
        q = args.query_pixel
        if q >= n:
            continue
        side = int(np.sqrt(m))
        for h in range(heads):
            row = tensor[h, q]
            if abs(row.sum() - 1.0) > 1e-6:
                raise RuntimeError(f"attention row does not renormalize: sum={row.sum()}")
            if side * side == m:
                sheet = row.reshape(side, side)
            else:
                sheet = row.reshape(1, m)  # projected keys have no pixel grid
            heatmap_png(sheet, out / f"stage{rec['stage']}_block{rec['block']}_head{h}_q{q}.png")
            wrote += 1
    print(f"wrote {wrote} attention heatmaps for query pixel {args.query_pixel} to {out}")
    return EXIT_OK


# -- parser --------------------------------------------------------------------------


def build_parser():
    p = argparse.ArgumentParser(prog="styleattn", description=__doc__,
                                formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, preset_default=None):
        sp.add_argument("--seed", type=int, default=0, help="master seed; all streams derive from it")
        sp.add_argument("--out", default="out", help="output directory")
        sp.add_argument("--precision", choices=("single", "double"), default="single")
        sp.add_argument("--config", default=None, help="JSON file with a generator config")
        sp.add_argument("--preset", default=preset_default,
                        help=f"generator preset ({', '.join(sorted(PRESETS))})")

    sp = sub.add_parser("generate", help="synthesize images")
    common(sp, "cifar10")
    sp.add_argument("--count", type=int, default=4)
    sp.add_argument("--noise", choices=("none", "random", "fixed"), default="none")
    sp.add_argument("--dump-raw", action="store_true", help="also write raw float dumps")
    sp.add_argument("--variant", default=None)
    sp.set_defaults(func=cmd_generate)

    sp = sub.add_parser("verify", help="run verification checks")
    common(sp)
    sp.add_argument("--checks", default=None,
                    help=f"comma-separated subset of: {', '.join(sorted(verify.CHECKS))}")
    sp.add_argument("--fast", action="store_true", help="reduced trial counts")
    sp.add_argument("--disable-demod", action="store_true",
                    help="negative control: demodulation off (std/concentration checks must fail)")
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("mix", help="style mixing grid")
    common(sp, "toy16")
    sp.add_argument("--row-seeds", default="1,2,3", help="low-resolution style sources")
    sp.add_argument("--col-seeds", default="4,5,6", help="high-resolution style sources")
    sp.add_argument("--cutoff", type=int, default=16,
                    help="slots at resolution <= cutoff take the row latent")
    sp.add_argument("--variant", default=None)
    sp.set_defaults(func=cmd_mix)

    sp = sub.add_parser("ablate", help="gradient-check (and optionally train) a block variant")
    common(sp)
    sp.add_argument("--variant", default="baseline")
    sp.add_argument("--steps", type=int, default=0, help="toy-training steps (0 = skip)")
    sp.add_argument("--fast", action="store_true")
    sp.set_defaults(func=cmd_ablate)

    sp = sub.add_parser("bench", help="attention complexity accounting")
    common(sp)
    sp.add_argument("--n", default="256,1024,4096", help="comma-separated pixel counts")
    sp.add_argument("--k", type=int, default=256, help="projection width")
    sp.set_defaults(func=cmd_bench)

    sp = sub.add_parser("train-toy", help="toy adversarial training on synthetic blobs")
    common(sp, "toy8")
    sp.add_argument("--steps", type=int, default=2000)
    sp.add_argument("--batch", type=int, default=16)
    sp.add_argument("--r1-gamma", type=float, default=0.0)
    sp.add_argument("--log-every", type=int, default=0)
    sp.set_defaults(func=cmd_train_toy, precision="double")

    sp = sub.add_parser("spectrum", help="attention-map singular value curves")
    common(sp, "toy16")
    sp.add_argument("--stage", type=int, default=1)
    sp.add_argument("--latents", type=int, default=16)
    sp.set_defaults(func=cmd_spectrum)

    sp = sub.add_parser("attn-dump", help="per-head attention heatmaps for one query pixel")
    common(sp, "toy16")
    sp.add_argument("--query-pixel", type=int, default=0)
    sp.add_argument("--variant", default=None)
    sp.set_defaults(func=cmd_attn_dump)

    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"configuration error: {e}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    except (ValueError, KeyError) as e:
        print(f"configuration error: {e}", file=sys.stderr)
        return EXIT_CONFIG_ERROR


if __name__ == "__main__":
    sys.exit(main())
