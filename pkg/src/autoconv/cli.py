"""Command-line interface.

Verbs: generate, filter, eval, schedule, inspect, quality-report.
Usage errors exit with status 2, runtime failures with 1.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from . import corpus, evaluation, pipeline, quality


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="autoconv",
        description="Generate, filter, and evaluate document-grounded synthetic conversations.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_gen = sub.add_parser("generate", help="run a generation job from a config file")
    p_gen.add_argument("--config", required=True, help="path to a run config (JSON)")
    p_gen.add_argument("--seed", type=int, default=None, help="override the manifest seed")
    p_gen.add_argument("--backend-url", default=None, help="override the backend endpoint")
    p_gen.add_argument("--model", default=None, help="override the backend model id")
    p_gen.add_argument("--concurrency", type=int, default=pipeline.DEFAULT_CONCURRENCY)
    p_gen.add_argument("--keep-fraction", type=float, default=None)
    p_gen.add_argument("--resume", action="store_true", help="resume from an existing checkpoint")
    p_gen.add_argument("--dry-run", action="store_true", help="validate the manifest and exit")

    p_filter = sub.add_parser("filter", help="diversity-filter an existing dataset")
    p_filter.add_argument("--input", required=True)
    p_filter.add_argument("--keep-fraction", type=float, default=pipeline.DEFAULT_KEEP_FRACTION)
    p_filter.add_argument("--output-dir", required=True)

    p_eval = sub.add_parser("eval", help="score a predictions file against gold dialogues")
    p_eval.add_argument("--pred", required=True, help="predictions file (JSONL)")
    p_eval.add_argument("--gold", required=True, help="gold dataset file (JSONL)")

    p_sched = sub.add_parser("schedule", help="look up the two-stage training schedule")
    p_sched.add_argument("--human", type=int, required=True)
    p_sched.add_argument("--synthetic", type=int, required=True)
    p_sched.add_argument("--json", dest="json_out", default=None,
                         help="also write the schedule record to this path")

    p_inspect = sub.add_parser("inspect", help="print dataset statistics")
    p_inspect.add_argument("--input", required=True)

    p_quality = sub.add_parser("quality-report", help="per-batch flag and diversity summary")
    p_quality.add_argument("--input", required=True)

    return parser


def _cmd_generate(args) -> int:
    manifest = pipeline.plan(args.config)
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.keep_fraction is not None:
        overrides["keep_fraction"] = args.keep_fraction
    backend_overrides = {}
    if args.backend_url:
        backend_overrides["endpoint"] = args.backend_url
    if args.model:
        backend_overrides["model_id"] = args.model
    if backend_overrides:
        overrides["backend"] = dataclasses.replace(manifest.backend, **backend_overrides)
    if overrides:
        manifest = dataclasses.replace(manifest, **overrides)

    if args.dry_run:
        print(f"manifest {manifest.id}: ok")
        print(
            f"dataset={manifest.dataset} documents={manifest.n_documents} "
            f"dialogues_per_doc={manifest.dialogues_per_doc} "
            f"turn_budget={manifest.params.turn_budget} "
            f"keep_fraction={manifest.keep_fraction} seed={manifest.seed}"
        )
        print(f"backend={manifest.backend.endpoint} model={manifest.backend.model_id}")
        print(f"output_dir={manifest.output_dir}")
        return 0

    report = pipeline.run(manifest, concurrency=args.concurrency, resume=args.resume)
    print(
        f"generated={report['generated']} kept={report['kept']} "
        f"removed={report['removed']} failed={report['failed']} "
        f"discarded={report['discarded']}"
    )
    print(f"outputs in {manifest.output_dir}")
    return 0


def _cmd_filter(args) -> int:
    dialogues = corpus.read_dataset(args.input)
    kept, removed = quality.filter_by_diversity(dialogues, args.keep_fraction)
    out = Path(args.output_dir)
    corpus.write_dataset(kept, out / "kept.jsonl")
    corpus.write_dataset(removed, out / "removed.jsonl")
    print(f"kept={len(kept)} removed={len(removed)}")
    return 0


def _cmd_eval(args) -> int:
    predictions = evaluation.read_predictions(args.pred)
    gold = corpus.read_dataset(args.gold)
    result = evaluation.evaluate(predictions, gold)
    print(
        f"f1={round(result.f1, 2)} em={round(result.em, 2)} "
        f"n_questions={result.n_questions}"
    )
    return 0


def _cmd_schedule(args) -> int:
    schedule = pipeline.training_schedule(args.human, args.synthetic)
    line = f"pretrain={schedule.pretrain_steps} finetune={schedule.finetune_steps}"
    if schedule.extrapolated:
        line += " extrapolated=true"
    print(line)
    if args.json_out:
        Path(args.json_out).write_text(
            json.dumps(schedule.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
    return 0


def _cmd_inspect(args) -> int:
    dialogues = corpus.read_dataset(args.input)
    summary = quality.batch_summary(dialogues)
    print(f"dialogues={summary['n_dialogues']} kept={summary['n_kept']}")
    print(f"mean_turns={round(summary['mean_turns'], 2)}")
    print(
        f"diversity min={round(summary['diversity_min'], 4)} "
        f"mean={round(summary['diversity_mean'], 4)} "
        f"max={round(summary['diversity_max'], 4)}"
    )
    for flag, count in summary["flag_counts"].items():
        print(f"flag {flag}={count}")
    return 0


def _cmd_quality_report(args) -> int:
    dialogues = corpus.read_dataset(args.input)
    summary = quality.batch_summary(dialogues)
    print(f"dialogues={summary['n_dialogues']}")
    print("flag counts:")
    for flag, count in summary["flag_counts"].items():
        print(f"  {flag:<14} {count}")
    print("diversity histogram (bins of 0.1):")
    for i, count in enumerate(summary["diversity_histogram"]):
        label = f"[{i / 10:.1f}, {(i + 1) / 10:.1f}{']' if i == 9 else ')'}"
        print(f"  {label:<12} {'#' * count} {count}")
    return 0


_COMMANDS = {
    "generate": _cmd_generate,
    "filter": _cmd_filter,
    "eval": _cmd_eval,
    "schedule": _cmd_schedule,
    "inspect": _cmd_inspect,
    "quality-report": _cmd_quality_report,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (OSError, ValueError, RuntimeError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    sys.exit(main())
