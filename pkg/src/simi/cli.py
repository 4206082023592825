"""Command-line front end.

Subcommands: decompose, train, enhance, eval, gradcheck, ablate. Heavy
imports happen inside the handlers so that --threads can pin the BLAS
thread count through environment variables before numpy loads.

Exit codes: 0 on success, 1 on an operational error (message on
stderr), 2 on usage errors. Machine-readable output goes to files or
stdout; diagnostics go to stderr.
"""

import argparse
import dataclasses
import json
import os
import sys
from pathlib import Path

GRADCHECK_THRESHOLD = 1e-4

ABLATION_VARIANTS = ("bitplane", "log", "quant", "nosimm")

_THREAD_VARS = ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS", "MKL_NUM_THREADS",
                "NUMEXPR_NUM_THREADS", "VECLIB_MAXIMUM_THREADS")


def _apply_threads(n):
    for var in _THREAD_VARS:
        os.environ[var] = str(n)


def _shared_flags():
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--seed", type=int, default=argparse.SUPPRESS,
                   help="override the configured seed")
    p.add_argument("--threads", type=int, default=argparse.SUPPRESS,
                   help="BLAS/OpenMP thread count (set before numpy loads)")
    p.add_argument("--config", default=argparse.SUPPRESS,
                   help="JSON training config file")
    return p


def build_parser():
    shared = _shared_flags()
    parser = argparse.ArgumentParser(
        prog="simi",
        description="Self-information-mining low-light image enhancement.",
        parents=[shared])
    sub = parser.add_subparsers(dest="command", metavar="command")

    p = sub.add_parser("decompose", parents=[shared],
                       help="write per-plane grayscale PNGs for one image")
    p.add_argument("--mode", choices=("bitplane", "log", "quant"), default="bitplane")
    p.add_argument("--in", dest="input", required=True, metavar="IMAGE")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--levels", default=None,
                   help="comma-separated quantization level counts (quant mode)")

    p = sub.add_parser("train", parents=[shared], help="train a model")
    p.add_argument("--data", required=True, help="directory of training images")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--resume", default=None, metavar="CKPT",
                   help="continue from a checkpoint (config digest must match)")

    p = sub.add_parser("enhance", parents=[shared], help="enhance one image")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--in", dest="input", required=True, metavar="IMAGE")
    p.add_argument("--out", required=True, metavar="IMAGE")
    p.add_argument("--dump-trace", default=None, metavar="DIR",
                   help="write per-stage images and curve maps as PNGs")

    p = sub.add_parser("eval", parents=[shared],
                       help="PSNR/SSIM of enhanced images against references")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--low-dir", required=True)
    p.add_argument("--ref-dir", required=True)
    p.add_argument("--report", required=True, metavar="OUT.JSON")

    p = sub.add_parser("gradcheck", parents=[shared],
                       help="finite-difference check of every op and the full loss")
    p.add_argument("--size", type=int, default=8, help="input side for the full-loss check")

    p = sub.add_parser("ablate", parents=[shared],
                       help="train all decomposition variants and compare")
    p.add_argument("--data", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--iterations", type=int, default=None,
                   help="override max_iterations from the config")
    p.add_argument("--threshold", type=float, default=0.5,
                   help="loss fraction defining iterations-to-threshold")
    return parser


def _load_train_config(args):
    from .trainer import TrainConfig

    config = (TrainConfig.from_json_file(args.config)
              if getattr(args, "config", None) else TrainConfig())
    seed = getattr(args, "seed", None)
    if seed is not None:
        config = dataclasses.replace(
            config, seed=seed,
            enhancer=dataclasses.replace(config.enhancer, seed=seed))
    return config


def cmd_decompose(args):
    import numpy as np

    from .decompose import (bitplane_decompose, log_threshold_decompose,
                            quant_threshold_decompose)
    from .imageio import RawImage, load_image, save_image

    img = load_image(args.input)
    if args.mode == "bitplane":
        planes = bitplane_decompose(img)
    elif args.mode == "log":
        planes = log_threshold_decompose(img)
    else:
        if args.levels:
            levels = tuple(int(v) for v in args.levels.split(","))
            planes = quant_threshold_decompose(img, levels)
        else:
            planes = quant_threshold_decompose(img)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    planes = planes[0]
    per_channel = planes.shape[0] // 3
    for c in range(3):
        for k in range(per_channel):
            gray = np.clip(np.rint(planes[c * per_channel + k] * 255.0), 0, 255)
            data = np.repeat(gray.astype(np.uint8)[:, :, None], 3, axis=2)
            save_image(out_dir / f"c{c}_p{k}.png", RawImage(data))
    print(f"wrote {planes.shape[0]} plane images to {out_dir}")
    return 0


def cmd_train(args):
    from . import enhancer
    from .report import read_log, render_loss_curves
    from .trainer import resume, train

    config = _load_train_config(args)
    print(f"parameters: {enhancer.param_count(config.enhancer)}")
    if args.resume:
        final = resume(args.resume, config, args.data, args.out_dir)
    else:
        final = train(config, args.data, args.out_dir)
    log_path = Path(args.out_dir) / "train_log.jsonl"
    if log_path.exists():
        records = read_log(log_path)
        if records:
            render_loss_curves(records, Path(args.out_dir) / "loss_curves.png")
    print(str(final))
    return 0


def _unit_to_image(tensor):
    import numpy as np

    from .imageio import from_unit_tensor

    return from_unit_tensor(np.asarray(tensor))


def cmd_enhance(args):
    from . import enhancer
    from .checkpoint import load_checkpoint
    from .enhancer import EnhancerConfig
    from .imageio import load_image, save_image, to_unit_tensor

    store, meta = load_checkpoint(args.checkpoint)
    config = EnhancerConfig.from_dict(meta["config"]["enhancer"])
    x = to_unit_tensor(load_image(args.input))
    trace = enhancer.forward(x, store, config)
    save_image(args.out, _unit_to_image(trace.output.value))
    if args.dump_trace:
        trace_dir = Path(args.dump_trace)
        trace_dir.mkdir(parents=True, exist_ok=True)
        for i, img in enumerate(trace.images):
            save_image(trace_dir / f"image_{i:02d}.png", _unit_to_image(img.value))
        for i, pair in enumerate(trace.curves, start=1):
            save_image(trace_dir / f"l1_{i:02d}.png", _unit_to_image(pair.l1.value))
            save_image(trace_dir / f"l2_{i:02d}.png", _unit_to_image(pair.l2.value))
    print(args.out)
    return 0


def cmd_eval(args):
    from . import enhancer
    from .checkpoint import load_checkpoint
    from .enhancer import EnhancerConfig
    from .imageio import load_image, to_unit_tensor
    from .metrics import MetricReport, psnr, ssim
    from .report import aligned_table, render_metric_bars

    store, meta = load_checkpoint(args.checkpoint)
    config = EnhancerConfig.from_dict(meta["config"]["enhancer"])
    low_dir, ref_dir = Path(args.low_dir), Path(args.ref_dir)
    names = sorted(p.name for p in low_dir.iterdir()
                   if p.suffix.lower() in (".png", ".ppm") and (ref_dir / p.name).exists())
    if not names:
        print("no image pairs matched by name", file=sys.stderr)
        return 1
    report = MetricReport()
    for name in names:
        x = to_unit_tensor(load_image(low_dir / name))
        trace = enhancer.forward(x, store, config)
        enhanced = _unit_to_image(trace.output.value)
        ref = load_image(ref_dir / name)
        report.add(name, psnr(enhanced, ref), ssim(enhanced, ref))

    report_path = Path(args.report)
    report_path.parent.mkdir(parents=True, exist_ok=True)
    report_path.write_text(json.dumps(report.to_dict(), indent=2) + "\n")
    render_metric_bars(report, report_path.with_suffix(".png"))
    rows = [(n, f"{p:.4f}", f"{s:.6f}") for n, p, s in
            zip(report.names, report.psnr_values, report.ssim_values)]
    rows.append(("mean", f"{report.mean_psnr:.4f}", f"{report.mean_ssim:.6f}"))
    print(aligned_table(("image", "psnr_db", "ssim"), rows), end="")
    return 0


def cmd_gradcheck(args):
    from .gradcheck import run_suite

    worst, results = run_suite(size=args.size, seed=getattr(args, "seed", None) or 1)
    for name, err in sorted(results.items(), key=lambda kv: -kv[1]):
        print(f"{name:24s} {err:.3e}", file=sys.stderr)
    print(f"max relative error: {worst:.6e}")
    return 0 if worst < GRADCHECK_THRESHOLD else 1


def _variant_config(base, variant):
    from .decompose import DecompositionMode

    enh = base.enhancer
    if variant == "nosimm":
        enh = dataclasses.replace(enh, use_simm=False)
    else:
        enh = dataclasses.replace(
            enh, use_simm=True, decomposition=DecompositionMode(variant=variant))
    return dataclasses.replace(base, enhancer=enh)


def cmd_ablate(args):
    from . import enhancer
    from .report import aligned_table, read_log, render_convergence
    from .trainer import train

    base = _load_train_config(args)
    if args.iterations is not None:
        base = dataclasses.replace(base, max_iterations=args.iterations)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    curves, summary = {}, {}
    for variant in ABLATION_VARIANTS:
        config = _variant_config(base, variant)
        run_dir = out_dir / f"variant_{variant}"
        print(f"[{variant}] training {config.max_iterations} iterations...",
              file=sys.stderr)
        train(config, args.data, run_dir)
        records = read_log(run_dir / "train_log.jsonl")
        curves[variant] = records
        initial = records[0]["total"] if records else float("nan")
        final = records[-1]["total"] if records else float("nan")
        reached = None
        for r in records:
            if r["total"] <= args.threshold * initial:
                reached = r["step"]
                break
        summary[variant] = {
            "params": enhancer.param_count(config.enhancer),
            "initial_total": initial,
            "final_total": final,
            "best_total": min((r["total"] for r in records), default=float("nan")),
            "steps_to_threshold": reached,
            "final_terms": {k: records[-1][k] for k in ("lc", "g", "lu", "s1", "s2")}
            if records else {},
        }

    payload = {
        "config": base.to_dict(),
        "threshold": args.threshold,
        "variants": summary,
    }
    (out_dir / "ablation.json").write_text(json.dumps(payload, indent=2) + "\n")
    rows = []
    for variant in ABLATION_VARIANTS:
        s = summary[variant]
        reached = s["steps_to_threshold"]
        rows.append((variant, s["params"], f"{s['initial_total']:.3f}",
                     f"{s['final_total']:.3f}",
                     str(reached) if reached is not None else "-"))
    table = aligned_table(
        ("variant", "params", "initial_loss", "final_loss",
         f"steps_to_{args.threshold:g}x"), rows)
    (out_dir / "ablation.txt").write_text(table)
    render_convergence(curves, out_dir / "convergence.png")
    print(table, end="")
    return 0


_HANDLERS = {
    "decompose": cmd_decompose,
    "train": cmd_train,
    "enhance": cmd_enhance,
    "eval": cmd_eval,
    "gradcheck": cmd_gradcheck,
    "ablate": cmd_ablate,
}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 2
    threads = getattr(args, "threads", None)
    if threads is not None:
        _apply_threads(threads)

    from .errors import SimiError

    try:
        return _HANDLERS[args.command](args)
    except SimiError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
