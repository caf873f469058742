"""Train/predict entry points for the trainer package."""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .data import build_examples, read_dialogues, read_documents
from .model import ModelSpec
from .predict import predict
from .train import two_stage_train


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="autoconv-trainer")
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="two-stage train on synthetic + human dialogues")
    p_train.add_argument("--synthetic", required=True, help="synthetic dataset (JSONL)")
    p_train.add_argument("--human", required=True, help="human dataset (JSONL)")
    p_train.add_argument("--docs", required=True, help="documents file (JSONL)")
    p_train.add_argument("--out", required=True, help="artifact directory")
    p_train.add_argument("--schedule", help="schedule record (JSON) from the pipeline")
    p_train.add_argument("--pretrain-steps", type=int)
    p_train.add_argument("--finetune-steps", type=int)
    p_train.add_argument("--lr", type=float, default=ModelSpec.lr)
    p_train.add_argument("--batch-size", type=int, default=ModelSpec.batch_size)
    p_train.add_argument("--embed-dim", type=int, default=ModelSpec.embed_dim)
    p_train.add_argument("--hidden-dim", type=int, default=ModelSpec.hidden_dim)
    p_train.add_argument("--seed", type=int, default=ModelSpec.seed)

    p_pred = sub.add_parser("predict", help="emit predictions for gold dialogues")
    p_pred.add_argument("--artifact", required=True)
    p_pred.add_argument("--gold", required=True)
    p_pred.add_argument("--docs", required=True)
    p_pred.add_argument("--out", required=True)
    return parser


def _cmd_train(args) -> int:
    if args.schedule:
        with open(args.schedule, encoding="utf-8") as handle:
            schedule = json.load(handle)
    elif args.pretrain_steps and args.finetune_steps:
        schedule = {"pretrain_steps": args.pretrain_steps, "finetune_steps": args.finetune_steps}
    else:
        print("error: pass --schedule or both --pretrain-steps/--finetune-steps", file=sys.stderr)
        return 2
    documents = read_documents(args.docs)
    synthetic = build_examples(read_dialogues(args.synthetic), documents)
    human = build_examples(read_dialogues(args.human), documents)
    spec = ModelSpec(
        embed_dim=args.embed_dim,
        hidden_dim=args.hidden_dim,
        lr=args.lr,
        batch_size=args.batch_size,
        seed=args.seed,
    )
    two_stage_train(synthetic, human, schedule, spec, args.out)
    print(f"artifact written to {args.out}")
    return 0


def _cmd_predict(args) -> int:
    documents = read_documents(args.docs)
    gold = read_dialogues(args.gold)
    count = predict(args.artifact, gold, documents, args.out)
    print(f"wrote {count} predictions to {args.out}")
    return 0


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    args = build_parser().parse_args(argv)
    handler = {"train": _cmd_train, "predict": _cmd_predict}[args.command]
    try:
        return handler(args)
    except (OSError, ValueError, KeyError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    sys.exit(main())
