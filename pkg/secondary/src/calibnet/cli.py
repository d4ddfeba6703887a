"""Command line: train from a JSON config, evaluate a checkpoint."""

from __future__ import annotations

import argparse
import sys

from . import __version__
from .config import load_config
from .evaluate import THRESHOLD, evaluate
from .training import TrainingDivergedError, load_checkpoint, train


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="calibnet",
        description="Train and run the line-aware calibration network.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train a model from a JSON config")
    p_train.add_argument("--config", required=True, help="single JSON config file")

    p_eval = sub.add_parser("evaluate", help="write predictions for a manifest")
    p_eval.add_argument("--checkpoint", required=True)
    p_eval.add_argument("--manifest", required=True)
    p_eval.add_argument("--out", required=True, help="predictions JSONL path")
    p_eval.add_argument("--threshold", type=float, default=THRESHOLD)
    return parser


def _cmd_train(args) -> int:
    try:
        model_cfg, train_cfg = load_config(args.config)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, TypeError) as exc:
        print(f"error: bad config: {exc}", file=sys.stderr)
        return 2
    try:
        model, history = train(model_cfg, train_cfg)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except TrainingDivergedError as exc:
        print(f"error: training diverged: {exc}", file=sys.stderr)
        return 1
    print(
        f"trained {len(history)} steps: total {history[0].total:.4f} -> "
        f"{history[-1].total:.4f}; wrote {train_cfg.out_dir}"
    )
    return 0


def _cmd_evaluate(args) -> int:
    try:
        model = load_checkpoint(args.checkpoint)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, KeyError, RuntimeError) as exc:
        print(f"error: bad checkpoint: {exc}", file=sys.stderr)
        return 2
    try:
        out = evaluate(model, args.manifest, args.out, threshold=args.threshold)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    print(f"wrote predictions to {out}")
    return 0


def entrypoint() -> None:
    args = _build_parser().parse_args()
    if args.command == "train":
        sys.exit(_cmd_train(args))
    sys.exit(_cmd_evaluate(args))
