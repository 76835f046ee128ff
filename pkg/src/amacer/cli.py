"""Subcommand front end for the attribute-mining pipeline.

Exit codes: 0 success, 1 invalid usage or invalid input data, 2 runtime
failure (diverged training, I/O breakage mid-run). The ``AMACER_LOG``
environment variable sets the log level (DEBUG, INFO, WARNING, ERROR).
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from typing import Sequence

from . import __version__
from .pipeline import (
    load_config,
    stage_candidates,
    stage_eval,
    stage_group,
    stage_latents,
    stage_patterns,
    stage_run,
    stage_sanitize,
    stage_train,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2


class _UsageError(Exception):
    """Raised instead of exiting so dispatch can map usage errors to 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        raise _UsageError(f"{self.prog}: {message}\n{self.format_usage()}")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="amacer", description=__doc__)
    parser.add_argument("--version", action="version", version=f"amacer {__version__}")
    common = _Parser(add_help=False)
    common.add_argument("--config", help="JSON config file merged over defaults")
    common.add_argument("--seed", type=int, help="override the run seed")
    common.add_argument("--out", default=".", help="output directory (default: cwd)")

    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("sanitize-seeds", parents=[common], help="distill raw profiles into a seed set")
    p.add_argument("--profiles", required=True)
    p.add_argument("--category", help="keep only this category's rows")

    p = sub.add_parser("induce-patterns", parents=[common], help="induce POS patterns from seed matches")
    p.add_argument("--products", required=True)
    p.add_argument("--seeds", required=True)
    p.add_argument("--min-support", type=int, help="minimum occurrences per pattern")
    p.add_argument("--include-punct", action="store_true", help="keep punctuation-bearing patterns")

    p = sub.add_parser("candidates", parents=[common], help="generate candidate spans")
    p.add_argument("--products", required=True)
    p.add_argument("--patterns", required=True)
    p.add_argument("--stopwords", help="custom stopword list, one word per line")
    p.add_argument("--max-span-len", type=int, help="longest candidate span in tokens")

    p = sub.add_parser("train", parents=[common], help="train the representation model")
    p.add_argument("--products", required=True)
    p.add_argument("--seeds", required=True)
    p.add_argument("--candidates", required=True)
    p.add_argument("--store", help="frozen embedding store binary (default: trainable table)")

    p = sub.add_parser("group", parents=[common], help="expand seeds and discover new attributes")
    p.add_argument("--products", required=True)
    p.add_argument("--seeds", required=True)
    p.add_argument("--candidates", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--store", help="frozen embedding store binary")

    p = sub.add_parser("eval", parents=[common], help="score clusters against gold spans")
    p.add_argument("--clusters", required=True)
    p.add_argument("--gold", required=True)
    p.add_argument("--seeds", required=True)
    p.add_argument("--mode", default="both", choices=["exact", "partial", "both"])

    p = sub.add_parser("latents", parents=[common], help="inspect latent attribute rankings")
    p.add_argument("--model", required=True)
    p.add_argument("--products", required=True)
    p.add_argument("--candidates", required=True)
    p.add_argument("--store", help="frozen embedding store binary")
    p.add_argument("--top-m", type=int, default=5)

    p = sub.add_parser("run", parents=[common], help="full pipeline in one invocation")
    p.add_argument("--products", required=True)
    p.add_argument("--seeds", help="seed set (or derive one via --profiles)")
    p.add_argument("--profiles", help="raw profiles to sanitize when --seeds is absent")
    p.add_argument("--gold", help="gold spans; enables the evaluation stage")
    p.add_argument("--store", help="frozen embedding store binary")
    p.add_argument("--mode", default="both", choices=["exact", "partial", "both"])

    return parser


def _apply_flag_overrides(config: dict, args: argparse.Namespace) -> dict:
    posgen = dict(config["posgen"])
    if getattr(args, "min_support", None) is not None:
        posgen["min_support"] = args.min_support
    if getattr(args, "include_punct", False):
        posgen["include_punct"] = True
    if getattr(args, "max_span_len", None) is not None:
        posgen["max_span_len"] = args.max_span_len
    return {**config, "posgen": posgen}


def dispatch(argv: Sequence[str]) -> int:
    """Parses argv, runs one subcommand, and maps failures to exit codes."""
    level = os.environ.get("AMACER_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")
    try:
        args = build_parser().parse_args(argv)
    except _UsageError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_USAGE

    try:
        config = load_config(args.config, seed_override=args.seed)
        config = _apply_flag_overrides(config, args)
        if args.command == "sanitize-seeds":
            path = stage_sanitize(args.profiles, args.category, args.out, config)
        elif args.command == "induce-patterns":
            path = stage_patterns(args.products, args.seeds, args.out, config)
        elif args.command == "candidates":
            path = stage_candidates(args.products, args.patterns, args.stopwords, args.out, config)
        elif args.command == "train":
            path = stage_train(args.products, args.seeds, args.candidates, args.store, args.out, config)
        elif args.command == "group":
            path = stage_group(
                args.products, args.seeds, args.candidates, args.model, args.store, args.out, config
            )
        elif args.command == "eval":
            path = stage_eval(args.clusters, args.gold, args.seeds, args.mode, args.out, config)
        elif args.command == "latents":
            path = stage_latents(
                args.model, args.products, args.candidates, args.store, args.top_m, args.out, config
            )
        else:
            artifacts = stage_run(
                args.products, args.seeds, args.profiles, args.gold, args.store, args.mode, args.out, config
            )
            for name, artifact in sorted(artifacts.items()):
                print(f"{name}: {artifact}")
            return EXIT_OK
        print(path)
        return EXIT_OK
    except (ValueError, FileNotFoundError, IsADirectoryError, NotADirectoryError, KeyError) as exc:
        # malformed inputs, schema violations, bad config values
        print(f"amacer: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # diverged training, mid-run I/O failure
        logger.debug("runtime failure", exc_info=True)
        print(f"amacer: runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


def main() -> None:
    raise SystemExit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
