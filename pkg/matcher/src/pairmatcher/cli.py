"""Command line interface: train a matcher or score samples with one."""

from __future__ import annotations

import argparse
import sys

from .model import ARCHITECTURES
from .sampleio import load_split, write_score_csv
from .train import APPROACHES, TrainSpec, load_model, predict, run_training


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pairmatcher")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train on a sample directory, emit artifacts")
    p.add_argument("--samples", required=True, help="directory holding train/ and valid/")
    p.add_argument("--subtask", type=int, choices=(1, 2, 3), required=True)
    p.add_argument("--approach", choices=APPROACHES, required=True)
    p.add_argument("--architecture", choices=ARCHITECTURES, default="tile-stat")
    p.add_argument("--epochs", type=int, default=10)
    p.add_argument("--batch-size", type=int, default=16)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--model-id", default="model")
    p.add_argument("--model", default=None, help="output model file")
    p.add_argument("--scores", default=None, help="output validation score CSV")
    p.add_argument("--report", default=None, help="output one-row report CSV")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("predict", help="score a sample split with a trained model")
    p.add_argument("--model", required=True)
    p.add_argument("--samples", required=True)
    p.add_argument("--split", choices=("train", "valid"), default="valid")
    p.add_argument("--output", required=True)
    p.add_argument("--model-id", default=None, help="override the stored model id")
    p.set_defaults(func=_cmd_predict)

    return parser


def _cmd_train(args) -> int:
    spec = TrainSpec(
        samples_dir=args.samples,
        subtask=args.subtask,
        approach=args.approach,
        architecture=args.architecture,
        epochs=args.epochs,
        batch_size=args.batch_size,
        seed=args.seed,
        model_id=args.model_id,
    )
    row = run_training(spec, args.model, args.scores, args.report)
    print(f"{row.model_id}: validation accuracy {row.validation_accuracy:.6f}, "
          f"loss {row.validation_loss:.6f}")
    return 0


def _cmd_predict(args) -> int:
    net, stored_id = load_model(args.model)
    model_id = args.model_id or stored_id
    samples = load_split(args.samples, args.split)
    write_score_csv(args.output, model_id, predict(net, samples))
    print(f"scored {len(samples)} pairs with {model_id} -> {args.output}")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
