"""``sentinel`` command line."""

from __future__ import annotations

import argparse
import logging
import sys
import tempfile
from pathlib import Path

from .corpus import load_corpus
from .errors import SentinelError
from .metamorph import generate_variant, parse_scope, verify_variant, write_variant
from .oracles import CheckerConfig
from .runner import (
    EXIT_FATAL,
    EXIT_OK,
    REPORT_FORMATS,
    load_config,
    report,
    review_items,
    review_set,
    run,
)


def _cmd_run(args) -> int:
    config = load_config(args.config)
    if args.resume:
        config.output_dir = Path(args.resume).resolve()
    summary = run(config)
    print(summary.describe())
    for line in summary.failures:
        print(f"  failed: {line}", file=sys.stderr)
    if not args.no_report:
        report(summary.run_dir)
    return summary.exit_code


def _cmd_review_list(args) -> int:
    items = review_items(args.run_dir, include_decided=args.all)
    for item in items:
        print(item.render())
        print()
    print(f"{len(items)} attempt(s) awaiting review" if not args.all else f"{len(items)} attempt(s)")
    return EXIT_OK


def _cmd_review_set(args) -> int:
    outcome = review_set(args.run_dir, args.triple, args.correct, args.notes or "", args.reviewer or "",
                         force=args.force)
    state = "correct" if outcome.correct else f"incorrect ({outcome.failure_reason.value})"
    print(f"{args.triple}: {outcome.status.value}, {state}")
    return EXIT_OK


def _cmd_report(args) -> int:
    formats = [f.strip() for f in args.format.split(",") if f.strip()]
    for path in report(args.run_dir, formats):
        print(path)
    return EXIT_OK


def _cmd_variants(args) -> int:
    root = Path(args.root)
    index = load_corpus(root)
    scope = parse_scope(args.scope)
    cases = [index.get(i) for i in args.ids] if args.ids else list(index)
    checkers = CheckerConfig()
    failed = 0
    for case in cases:
        variant = generate_variant(case, args.seed, scope)
        if not args.no_verify:
            with tempfile.TemporaryDirectory() as ws:
                variant = verify_variant(variant, case, ws, checkers)
        path = write_variant(variant, args.out or root)
        status = "unverified" if args.no_verify else ("verified" if variant.verified else "NOT verified")
        failed += not args.no_verify and not variant.verified
        print(f"{variant.variant_id}: {status} -> {path}")
    return 2 if failed else EXIT_OK


def _cmd_corpus_validate(args) -> int:
    index = load_corpus(args.root)
    for p in index.problems:
        print(f"error: {p.case_id}: {p.code} ({p.field}): {p.reason}")
    for w in index.warnings:
        print(f"warning: {w.case_id}: {w.code}: {w.reason}")
    counts = ", ".join(f"{lang}/{kind}={n}" for (lang, kind), n in sorted(
        ((lang.value, kind.value), n) for (lang, kind), n in index.counts.items()))
    print(f"{len(index)} valid case(s); {counts or 'none'}")
    return EXIT_FATAL if index.problems else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sentinel", description="Refactoring-bug detection harness.")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="query backends over the corpus and judge the answers")
    p.add_argument("--config", required=True, help="TOML run configuration")
    p.add_argument("--resume", metavar="DIR", help="continue the run stored in DIR")
    p.add_argument("--no-report", action="store_true", help="skip writing reports after the run")
    p.set_defaults(func=_cmd_run)

    review = sub.add_parser("review", help="adjudicate Type I explanations")
    rsub = review.add_subparsers(dest="review_command", required=True)
    p = rsub.add_parser("list", help="show attempts awaiting review")
    p.add_argument("run_dir")
    p.add_argument("--all", action="store_true", help="include attempts already reviewed")
    p.set_defaults(func=_cmd_review_list)
    p = rsub.add_parser("set", help="record a review for case/backend/attempt[@temperature]")
    p.add_argument("run_dir")
    p.add_argument("triple")
    verdict = p.add_mutually_exclusive_group(required=True)
    verdict.add_argument("--correct", dest="correct", action="store_true")
    verdict.add_argument("--incorrect", dest="correct", action="store_false")
    p.add_argument("--notes")
    p.add_argument("--reviewer")
    p.add_argument("--force", action="store_true", help="override an earlier review")
    p.set_defaults(func=_cmd_review_set)

    p = sub.add_parser("report", help="write metrics and summaries for a run")
    p.add_argument("run_dir")
    p.add_argument("--format", default=",".join(REPORT_FORMATS), help="comma list of csv, json, md")
    p.set_defaults(func=_cmd_report)

    variants = sub.add_parser("variants", help="metamorphic variants")
    vsub = variants.add_subparsers(dest="variants_command", required=True)
    p = vsub.add_parser("generate", help="write renamed/remapped variants under ROOT/variants")
    p.add_argument("root", help="corpus directory")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--scope", required=True, help="comma list of variables, methods, classes, packages, numbers")
    p.add_argument("--ids", nargs="*", help="only these case ids")
    p.add_argument("--out", help="directory to hold variants/ (default: ROOT)")
    p.add_argument("--no-verify", action="store_true", help="skip the compile-oracle check")
    p.set_defaults(func=_cmd_variants)

    corpus = sub.add_parser("corpus", help="corpus maintenance")
    csub = corpus.add_subparsers(dest="corpus_command", required=True)
    p = csub.add_parser("validate", help="check every case document under ROOT")
    p.add_argument("root")
    p.set_defaults(func=_cmd_corpus_validate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (SentinelError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FATAL


if __name__ == "__main__":
    sys.exit(main())
