"""Command-line entry point: ``helpvote <subcommand> [flags]``.

Settings come from an optional JSON config (``--config``); any flag given on
the command line overrides the corresponding config key.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace

from . import pipeline
from .errors import HelpvoteError
from .pipeline import RunConfig

COMMANDS = {
    "eda": pipeline.cmd_eda,
    "correlate": pipeline.cmd_correlate,
    "train": pipeline.cmd_train,
    "evaluate": pipeline.cmd_evaluate,
    "synth": pipeline.cmd_synth,
    "report": pipeline.cmd_report,
}

HELP = {
    "eda": "star summary and histogram CSVs",
    "correlate": "correlation matrix and retained feature list",
    "train": "train every requested model; write checkpoints and train reports",
    "evaluate": "score checkpoints on the test split; write model_comparison.csv",
    "synth": "write a synthetic corpus to OUT/synthetic.jsonl",
    "report": "run eda, correlate, train and evaluate; bundle into report.json",
}


def _csv_list(text: str) -> list[str]:
    return [t.strip() for t in text.split(",") if t.strip()]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="JSON run config")
    common.add_argument("--data", metavar="PATH", help="JSON Lines review corpus")
    common.add_argument("--out", metavar="DIR", help="output directory")
    common.add_argument("--seed", type=int, help="global seed")
    common.add_argument("--lexicon", metavar="PATH", help="sentiment lexicon TSV (default: bundled)")
    common.add_argument("--threshold", type=float, help="retain features with |r| above this")
    common.add_argument("--whitelist", type=_csv_list, metavar="LIST", help="features kept regardless of r")
    common.add_argument("--features", type=_csv_list, metavar="LIST",
                        help="comma-separated features: analysed set for eda/correlate, "
                             "model inputs for train/evaluate/report")
    common.add_argument("--model", action="append", metavar="KIND",
                        help="model to train/evaluate (repeatable); KIND or KIND:adamw")
    common.add_argument("--max-text-len", type=int, metavar="N",
                        help="drop reviews whose text exceeds N characters (Unicode code points)")
    common.add_argument("--leave-one-out", action="store_true", default=None,
                        help="exclude the review itself from its author's average helpful votes")
    common.add_argument("--threads", type=int, metavar="N", help="worker processes for parsing")
    common.add_argument("--n", type=int, help="synth: number of reviews")
    common.add_argument("--signal", type=float, help="synth: planted helpfulness signal in [0, 1]")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="helpvote", description="Review helpfulness prediction pipeline.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], help=HELP[name])
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig.from_file(args.config) if args.config else RunConfig()
    overrides = {
        "data": args.data,
        "out": args.out,
        "seed": args.seed,
        "lexicon": args.lexicon,
        "threshold": args.threshold,
        "whitelist": args.whitelist,
        "models": args.model,
        "max_text_length": args.max_text_len,
        "leave_one_out_user_avg": args.leave_one_out,
        "threads": args.threads,
        "synth_n": args.n,
        "synth_signal": args.signal,
    }
    if args.features is not None:
        key = "features" if args.command in ("eda", "correlate") else "train_features"
        overrides[key] = args.features
    overrides = {k: v for k, v in overrides.items() if v is not None}
    return replace(cfg, **overrides).normalized()


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
        for path in COMMANDS[args.command](cfg):
            print(path)
    except HelpvoteError as exc:
        print(f"helpvote {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError) as exc:
        print(f"helpvote {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
