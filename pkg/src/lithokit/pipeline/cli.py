"""Command-line entry point.

Subcommands: gen-data, train-gen, train-det, finetune-joint, eval,
predict, render.  Exit codes: 0 success, 2 configuration/usage error,
3 I/O error, 4 numeric failure.  Setting LITHOKIT_DETERMINISTIC=1
switches torch to deterministic-only kernels before anything runs.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace
from pathlib import Path

import torch

from ..corpus.build import build_corpus, corpus_fingerprint
from ..errors import ConfigurationError, InputError, NumericError, UsageError
from .checkpoint import load_checkpoint
from .configio import corpus_config_from_yaml, load_run_config
from .evaluate import (
    evaluate_run,
    predict_detection,
    predict_generation,
    predict_joint,
    render_report,
)
from .train import joint_finetune, pretrain_detector, pretrain_generator


def _cmd_gen_data(args) -> int:
    cfg = corpus_config_from_yaml(args.config, args.out)
    manifest = build_corpus(cfg)
    print(f"wrote {manifest.counts['train']} train / {manifest.counts['test']} test "
          f"samples to {args.out}")
    print(f"fingerprint {corpus_fingerprint(args.out)}")
    return 0


def _run_config(args, expected_phase: str):
    cfg = load_run_config(args.config)
    cfg = replace(cfg, corpus=str(args.corpus), out_dir=str(args.out))
    if cfg.phase != expected_phase:
        raise ConfigurationError(
            f"config declares phase {cfg.phase!r}; this command runs {expected_phase!r}")
    return cfg


def _cmd_train_gen(args) -> int:
    path = pretrain_generator(_run_config(args, "gen_pretrain"))
    print(f"checkpoint {path}")
    return 0


def _cmd_train_det(args) -> int:
    path = pretrain_detector(_run_config(args, "det_pretrain"))
    print(f"checkpoint {path}")
    return 0


def _cmd_finetune_joint(args) -> int:
    path = joint_finetune(_run_config(args, "joint_finetune"))
    print(f"checkpoint {path}")
    return 0


def _cmd_eval(args) -> int:
    report = evaluate_run(
        args.ckpt, args.corpus, args.task, split=args.split,
        report_path=args.report, csv_path=args.csv, render_dir=args.render)
    summary = {k: report[k] for k in
               ("task", "n_images", "mPA", "mIoU", "edge_f1",
                "recall", "precision", "f1", "fa", "ap50")}
    print(json.dumps(summary, indent=2))
    return 0


def _cmd_predict(args) -> int:
    kind = load_checkpoint(args.ckpt).kind
    if kind == "generator":
        if args.condition is None:
            raise ConfigurationError("generator prediction needs --condition")
        paths = predict_generation(args.ckpt, args.layout, args.condition, args.out)
    elif kind == "detector":
        paths = predict_detection(args.ckpt, args.layout, args.out)
    elif kind == "joint":
        if args.condition is None:
            raise ConfigurationError("joint prediction needs --condition")
        paths = predict_joint(args.ckpt, args.layout, args.condition, args.out)
    else:
        raise ConfigurationError(f"cannot predict from a {kind!r} checkpoint")
    for name, path in paths.items():
        print(f"{name}: {path}")
    return 0


def _cmd_render(args) -> int:
    with open(args.report) as fh:
        report = json.load(fh)
    written = render_report(report, args.out)
    print(f"wrote {len(written)} overlays to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lithokit",
        description="Synthetic-lithography generation and hotspot detection")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="build a synthetic corpus")
    p.add_argument("--config", required=True, type=Path)
    p.add_argument("--out", required=True, type=Path)
    p.set_defaults(func=_cmd_gen_data)

    for name, func in (("train-gen", _cmd_train_gen),
                       ("train-det", _cmd_train_det),
                       ("finetune-joint", _cmd_finetune_joint)):
        p = sub.add_parser(name, help=f"run the {name.replace('-', ' ')} phase")
        p.add_argument("--config", required=True, type=Path)
        p.add_argument("--corpus", required=True, type=Path)
        p.add_argument("--out", required=True, type=Path)
        p.set_defaults(func=func)

    p = sub.add_parser("eval", help="score a checkpoint on a corpus split")
    p.add_argument("--ckpt", required=True, type=Path)
    p.add_argument("--corpus", required=True, type=Path)
    p.add_argument("--task", required=True,
                   choices=("drc", "mrc", "lrc", "unified", "generation"))
    p.add_argument("--report", required=True, type=Path)
    p.add_argument("--csv", type=Path, default=None)
    p.add_argument("--render", type=Path, default=None)
    p.add_argument("--split", default="test", choices=("train", "test"))
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("predict", help="single-input inference")
    p.add_argument("--ckpt", required=True, type=Path)
    p.add_argument("--layout", required=True, type=Path)
    p.add_argument("--condition", type=Path, default=None)
    p.add_argument("--out", required=True, type=Path)
    p.set_defaults(func=_cmd_predict)

    p = sub.add_parser("render", help="draw overlays from a saved report")
    p.add_argument("--report", required=True, type=Path)
    p.add_argument("--out", required=True, type=Path)
    p.set_defaults(func=_cmd_render)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if os.environ.get("LITHOKIT_DETERMINISTIC", "") not in ("", "0"):
        torch.use_deterministic_algorithms(True)
    try:
        return args.func(args)
    except (ConfigurationError, InputError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 3
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
