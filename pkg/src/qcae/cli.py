"""Command line entry point: ``qcae {train,eval,reproduce,gradcheck,report}``."""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import backend
from .errors import QCAEError
from .experiment import (KINDS, OUTPUT_DIR_ENV, ExperimentConfig, evaluate, image_name,
                         latent_summary, load_config, load_images, reproduce, resolve_image,
                         train, write_loss_curves)
from .imaging import center_crop, load_image
from .metrics import EvalReport, count_parameters
from .model import build_model, load_checkpoint, save_checkpoint

log = logging.getLogger("qcae")


def _add_common(p, seed_required=False):
    p.add_argument("--config", help="JSON experiment config")
    p.add_argument("--seed", type=int, required=seed_required)
    p.add_argument("--scale", type=int, help="crop factor relative to a 512x768 frame")
    p.add_argument("--epochs", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--train-image", help="path, or sample:<name> for a bundled image")
    p.add_argument("--test-image", action="append", dest="test_images",
                   help="repeatable; path or sample:<name>")
    p.add_argument("--output-dir", help=f"defaults to ${OUTPUT_DIR_ENV} or the config value")


def build_parser():
    parser = argparse.ArgumentParser(prog="qcae", description=__doc__)
    parser.add_argument("-q", "--quiet", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train one model on the gray training image")
    _add_common(p)
    p.add_argument("--model", choices=KINDS, default="QCAE")

    p = sub.add_parser("eval", help="evaluate a checkpoint on color test images")
    _add_common(p)
    p.add_argument("--checkpoint", required=True)

    p = sub.add_parser("reproduce", help="train and evaluate QCAE and CAE end to end")
    _add_common(p, seed_required=True)

    p = sub.add_parser("gradcheck", help="finite-difference check of every backward pass")
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("report", help="pretty-print an evaluation report")
    p.add_argument("path")
    p.add_argument("--json", action="store_true", help="echo the raw document")
    return parser


def _experiment_config(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    t = cfg.train
    for name in ("seed", "scale", "epochs", "lr", "train_image", "test_images"):
        value = getattr(args, name, None)
        if value is not None:
            setattr(t, name, value)
    t.output_dir = args.output_dir or os.environ.get(OUTPUT_DIR_ENV) or t.output_dir
    t.validate()
    return cfg


def cmd_train(args):
    cfg = _experiment_config(args)
    t = cfg.train
    out = Path(t.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    train_img, _ = load_images(type(t)(**{**t.__dict__, "test_images": []}))
    model = build_model(cfg.models[args.model], t.seed)
    result = train(model, train_img, t)
    ckpt = out / f"{args.model.lower()}.ckpt.json"
    save_checkpoint(model, ckpt, extra={"seed": t.seed, "epochs": t.epochs,
                                        "crop": [train_img.height, train_img.width]})
    write_loss_curves(out / f"{args.model.lower()}_loss_curve.csv", {args.model: result.losses})
    print(f"{args.model}: final loss {result.losses[-1]:.6g} after {t.epochs} epochs -> {ckpt}")
    return 0


def cmd_eval(args):
    cfg = _experiment_config(args)
    t = cfg.train
    model = load_checkpoint(args.checkpoint)
    h, w = t.crop_size()
    tests = {image_name(ref): center_crop(load_image(resolve_image(ref)), h, w)
             for ref in t.test_images}
    out = Path(t.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    report = EvalReport(config=cfg.to_dict(), seed=t.seed)
    report.records = evaluate(model, tests, out, expected_shape=(h, w))
    report.parameter_counts[model.kind] = count_parameters(model)
    report.latent[model.kind] = latent_summary(model.config, h, w)
    stem = f"{model.kind.lower()}_eval"
    (out / f"{stem}.json").write_text(report.to_json())
    (out / f"{stem}.csv").write_text(report.to_csv())
    print(report.format_table())
    return 0


def cmd_reproduce(args):
    cfg = _experiment_config(args)
    report = reproduce(cfg, cfg.train.output_dir)
    print(report.format_table())
    print(f"outputs written to {cfg.train.output_dir}")
    return 0


def cmd_gradcheck(args):
    from .gradcheck import REL_TOL, run_all
    results = run_all(seed=args.seed)
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'}  {r.name:<28} max rel err {r.max_rel_error:.2e} "
              f"({r.entries} entries)")
    failed = [r for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} checks below {REL_TOL:g}")
    return 1 if failed else 0


def cmd_report(args):
    try:
        text = Path(args.path).read_text()
    except FileNotFoundError:
        raise QCAEError(f"no such report: {args.path}") from None
    try:
        report = EvalReport.from_json(text)
    except (ValueError, KeyError, TypeError) as e:
        raise QCAEError(f"{args.path}: not an evaluation report ({e})") from None
    if args.json:
        print(report.to_json(), end="")
        return 0
    print(f"seed: {report.seed}")
    print(report.format_table())
    for kind, lat in report.latent.items():
        print(f"{kind} latent {lat['latent_shape']}: {lat['latent_real_scalars']} real scalars "
              f"(input {lat['input_real_scalars']}, distinct gray values {lat['input_distinct_gray_values']})")
    return 0


COMMANDS = {"train": cmd_train, "eval": cmd_eval, "reproduce": cmd_reproduce,
            "gradcheck": cmd_gradcheck, "report": cmd_report}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    log.debug("kernel backend: %s", backend.NAME)
    try:
        return COMMANDS[args.command](args)
    except (QCAEError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
