"""Command-line surface.

Subcommands: render, metrics, loss, selftest, generate-weights.  Reports
go to stdout as JSON, diagnostics to stderr.  Exit codes: 0 success,
1 selftest failure, 2 parse/validation problem (message names the
offending field), 3 tensor/weight shape mismatch.  All inputs are
validated before any compute starts; outputs are written atomically.
Behaviour is controlled by explicit flags only — no environment
variables — so runs are reproducible from the command line alone.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import math
import sys
import time

import numpy as np

from . import losses, network, pngio, selftest
from .color_hvi import rgb_to_hvi
from .errors import ShapeError, ValidationError
from .metrics import delta_e_loss, psnr, ssim
from .parallel import set_thread_count
from .raw_frontend import frontend_process, load_bayer


def _emit(report: dict) -> None:
    json.dump(report, sys.stdout, indent=2)
    sys.stdout.write("\n")


def _json_psnr(value: float):
    # JSON has no infinity literal; the sentinel is the string "inf".
    return "inf" if math.isinf(value) else value


def cmd_render(args) -> int:
    set_thread_count(args.threads)
    t0 = time.perf_counter()
    frame = load_bayer(args.raw, args.meta)
    bundle = network.load_weights(args.weights)
    if args.hvi_k is not None:
        bundle = network.WeightBundle(
            config=dataclasses.replace(bundle.config, hvi_k=args.hvi_k),
            tensors=bundle.tensors,
        )
    packed = frontend_process(frame)
    rgb = network.render(packed, bundle)
    pngio.write_png(args.out, rgb)
    _emit(
        {
            "output": args.out,
            "width": int(rgb.shape[2]),
            "height": int(rgb.shape[1]),
            "seconds": round(time.perf_counter() - t0, 4),
        }
    )
    return 0


def cmd_metrics(args) -> int:
    pred = pngio.read_png(args.pred)
    gt = pngio.read_png(args.gt)
    if pred.shape != gt.shape:
        raise ValidationError(
            f"pred/gt dimensions differ: {pred.shape[2]}x{pred.shape[1]} vs "
            f"{gt.shape[2]}x{gt.shape[1]}"
        )
    p = psnr(pred, gt)
    s = ssim(pred, gt)
    d = delta_e_loss(pred, gt)
    _emit(
        {
            "psnr": _json_psnr(p),
            "ssim": s,
            "delta_e": d,
            "lpips": None,
            "per_sample": {"psnr": [_json_psnr(p)], "ssim": [s], "delta_e": [d]},
            "config": {"ssim_window": 11, "ssim_sigma": 1.5, "data_range": 1.0},
        }
    )
    return 0


def _load_loss_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise ValidationError(f"cannot read loss config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ValidationError(f"loss config {path} is not valid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ValidationError(f"loss config {path} must be a JSON object")
    return cfg


def cmd_loss(args) -> int:
    set_thread_count(args.threads)
    preds = args.pred or []
    gts = args.gt or []
    if not preds:
        raise ValidationError("loss needs at least one --pred/--gt pair")
    if len(preds) != len(gts):
        raise ValidationError(
            f"file list length mismatch: {len(preds)} pred vs {len(gts)} gt"
        )
    cfg = _load_loss_config(args.config)
    fdm_cfg = cfg.get("fdm", {})
    if not isinstance(fdm_cfg, dict):
        raise ValidationError("loss config key fdm must be an object")
    lam_de = args.lambda_de if args.lambda_de is not None else cfg.get(
        "lambda_delta_e", losses.DEFAULT_LAMBDA_DELTA_E
    )
    lam_fdm = args.lambda_fdm if args.lambda_fdm is not None else cfg.get(
        "lambda_fdm", losses.DEFAULT_LAMBDA_FDM
    )
    seed = args.fdm_seed if args.fdm_seed is not None else fdm_cfg.get("seed", 0)
    dim = fdm_cfg.get("dim", 256)
    weights = losses.LossWeights(lambda_delta_e=float(lam_de), lambda_fdm=float(lam_fdm))
    extractor = losses.FdmExtractorConfig(seed=int(seed), dim=int(dim))

    batch = []
    for pred_path, gt_path in zip(preds, gts):
        pred = pngio.read_png(pred_path)
        gt = pngio.read_png(gt_path)
        if pred.shape != gt.shape:
            raise ValidationError(
                f"dimensions differ for pair {pred_path} / {gt_path}: "
                f"{pred.shape} vs {gt.shape}"
            )
        batch.append(
            (pred, gt, rgb_to_hvi(pred, args.hvi_k), rgb_to_hvi(gt, args.hvi_k))
        )
    report = losses.total_loss(batch, weights, extractor)
    out = report.to_dict()
    out["config"] = {
        "lambda_delta_e": weights.lambda_delta_e,
        "lambda_fdm": weights.lambda_fdm,
        "fdm": {"seed": extractor.seed, "dim": extractor.dim},
        "hvi_k": args.hvi_k,
    }
    _emit(out)
    return 0


def cmd_selftest(_args) -> int:
    results = selftest.run_all()
    report = {
        "suites": [
            {
                "name": r.name,
                "cases": r.cases,
                "failures": r.failures,
                "first_failure": r.first_failure,
            }
            for r in results
        ],
        "passed": all(r.passed for r in results),
    }
    _emit(report)
    for r in results:
        if not r.passed:
            print(
                f"selftest failure in suite {r.name}: {r.first_failure}",
                file=sys.stderr,
            )
    return 0 if report["passed"] else 1


def cmd_generate_weights(args) -> int:
    config = network.NetworkConfig(
        base_channels=args.base_channels, depth=args.depth, hvi_k=args.hvi_k
    )
    bundle = network.generate_weights(config, args.seed)
    network.save_weights(bundle, args.out)
    _emit(
        {
            "output": args.out,
            "seed": args.seed,
            "base_channels": config.base_channels,
            "depth": config.depth,
            "hvi_k": config.hvi_k,
            "tensors": len(bundle.tensors),
        }
    )
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nightisp",
        description="Low-light raw rendering pipeline: render, score, self-check.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("render", help="render a raw capture to an 8-bit PNG")
    p.add_argument("--raw", required=True, help="binary little-endian uint16 mosaic")
    p.add_argument("--meta", default=None, help="JSON sidecar (default: <raw>.json)")
    p.add_argument("--weights", required=True, help="network weight bundle")
    p.add_argument("--out", required=True, help="output PNG path")
    p.add_argument("--hvi-k", type=float, default=None,
                   help="override the bundle's intensity-collapse exponent")
    p.add_argument("--threads", type=int, default=1, help="worker threads (0 = auto)")
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("metrics", help="score a rendered PNG against ground truth")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("loss", help="evaluate the training objective on a batch")
    p.add_argument("--pred", action="append", help="predicted PNG (repeatable)")
    p.add_argument("--gt", action="append", help="ground-truth PNG (repeatable)")
    p.add_argument("--config", default=None, help="loss config JSON")
    p.add_argument("--lambda-de", type=float, default=None,
                   help="colour-difference weight (overrides config)")
    p.add_argument("--lambda-fdm", type=float, default=None,
                   help="feature-distribution weight (overrides config)")
    p.add_argument("--fdm-seed", type=int, default=None,
                   help="feature-extractor seed (overrides config)")
    p.add_argument("--hvi-k", type=float, default=1.0,
                   help="intensity-collapse exponent for the decoupled-domain terms")
    p.add_argument("--threads", type=int, default=1, help="worker threads (0 = auto)")
    p.set_defaults(func=cmd_loss)

    p = sub.add_parser("selftest", help="run the embedded property suites")
    p.set_defaults(func=cmd_selftest)

    p = sub.add_parser("generate-weights", help="emit a deterministic random bundle")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--base-channels", type=int, default=16)
    p.add_argument("--depth", type=int, default=3)
    p.add_argument("--hvi-k", type=float, default=1.0)
    p.set_defaults(func=cmd_generate_weights)
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ShapeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
