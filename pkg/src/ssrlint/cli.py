"""Command-line entry point and its subcommands."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .detect import DEFECTS
from .errors import LabelMismatch, SchemaError, SsrlintError
from .extract import LlmConfig
from .metrics import accuracy_to_text, load_gold, load_labels, produced_models, score_corpus, score_model_accuracy
from .pipeline import RunConfig, analyze, exit_code
from .report import FORMATS, render


def parse_rules(text: str) -> set[str]:
    names = {x.strip().upper() for x in text.split(",") if x.strip()}
    bad = sorted(names - set(DEFECTS))
    if bad:
        raise argparse.ArgumentTypeError(f"unknown defect type(s) {', '.join(bad)}; choose from {','.join(DEFECTS)}")
    if not names:
        raise argparse.ArgumentTypeError("empty rule list")
    return names


def _positive(text: str) -> int:
    n = int(text)
    if n < 0:
        raise argparse.ArgumentTypeError("must be >= 0")
    return n


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--extractor", choices=("heuristic", "llm"), default="heuristic",
                   help="how staking roles are found (default: heuristic)")
    p.add_argument("--jobs", type=_positive, default=0, metavar="N", help="worker count (default: CPU count)")
    p.add_argument("--strict-llm", action="store_true", help="fail instead of falling back when the LLM is unavailable")
    p.add_argument("--llm-samples", type=int, default=None, metavar="N", help="responses sampled per prompt for voting")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ssrlint", description="Static detection of logic defects in DeFi staking contracts.")
    parser.add_argument("--version", action="version", version=f"ssrlint {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="log progress to stderr (repeat for debug)")
    sub = parser.add_subparsers(dest="command", required=True)

    a = sub.add_parser("analyze", help="analyze contracts and report findings")
    a.add_argument("paths", nargs="+", help="Solidity sources or solc AST JSON files; directories are searched")
    a.add_argument("--format", choices=FORMATS, default="text")
    a.add_argument("--rules", type=parse_rules, default=set(DEFECTS), metavar="LIST",
                   help=f"comma-separated defect types to check (default: {','.join(DEFECTS)})")
    a.add_argument("--fail-on", choices=("none", "any", "high"), default="any",
                   help="which findings make the exit code 1 (default: any)")
    a.add_argument("--dump-graphs", metavar="DIR", help="write CFG and call graph DOT files")
    a.add_argument("--dump-cdg", metavar="DIR", help="write calculation dependency graphs as DOT files")
    a.add_argument("--dump-facts", action="store_true", help="print derived facts as JSON lines on stderr")
    _common(a)

    c = sub.add_parser("corpus", help="score detections against a labeled corpus")
    c.add_argument("--labels", required=True, help="labels.json")
    c.add_argument("paths", nargs="*", help="inputs (default: the directory holding labels.json)")
    c.add_argument("--format", choices=("text", "json"), default="text")
    c.add_argument("--gold", help="also score model accuracy against this gold.json")
    _common(c)

    s = sub.add_parser("score-model", help="score staking models against hand-written gold models")
    s.add_argument("--gold", required=True, help="gold.json")
    s.add_argument("paths", nargs="*", help="inputs (default: the directory holding gold.json)")
    s.add_argument("--format", choices=("text", "json"), default="text")
    _common(s)
    return parser


def _config(args: argparse.Namespace, inputs: list[str]) -> RunConfig:
    llm = None
    if args.extractor == "llm":
        llm = LlmConfig.from_env(sample_count=args.llm_samples)
    return RunConfig(
        inputs=inputs,
        format=getattr(args, "format", "text"),
        extractor=args.extractor,
        rules=getattr(args, "rules", set(DEFECTS)),
        jobs=args.jobs,
        fail_on=getattr(args, "fail_on", "any"),
        dump_graphs=getattr(args, "dump_graphs", None),
        dump_cdg=getattr(args, "dump_cdg", None),
        dump_facts=getattr(args, "dump_facts", False),
        llm=llm,
        strict_llm=args.strict_llm,
    )


def _warn(report) -> None:
    for w in report.warnings:
        print(f"warning: {w}", file=sys.stderr)


def cmd_analyze(args: argparse.Namespace) -> int:
    cfg = _config(args, args.paths)
    report = analyze(cfg)
    _warn(report)
    for r in report.results:
        if r.status == "errored":
            print(f"error: {r.file}{':' + r.contract if r.contract else ''}: {r.error}", file=sys.stderr)
        if cfg.dump_facts and r.facts is not None:
            for line in r.facts.to_lines():
                print(line, file=sys.stderr)
    sys.stdout.write(render(report, cfg.format))
    return exit_code(report, cfg.fail_on)


def cmd_corpus(args: argparse.Namespace) -> int:
    labels = load_labels(args.labels)
    inputs = args.paths or [str(labels.root)]
    report = analyze(_config(args, inputs))
    _warn(report)
    metrics = score_corpus(labels, report)
    if args.gold:
        gold, root = load_gold(args.gold)
        metrics.model_accuracy = score_model_accuracy(gold, produced_models(report, root, list(gold)))
    if args.format == "json":
        sys.stdout.write(json.dumps(metrics.to_json(), indent=2) + "\n")
    else:
        sys.stdout.write(metrics.to_text())
        if metrics.model_accuracy is not None:
            sys.stdout.write(accuracy_to_text(metrics.model_accuracy))
    return 2 if report.errored else 0


def cmd_score_model(args: argparse.Namespace) -> int:
    gold, root = load_gold(args.gold)
    inputs = args.paths or [str(root)]
    report = analyze(_config(args, inputs))
    _warn(report)
    acc = score_model_accuracy(gold, produced_models(report, root, list(gold)))
    if args.format == "json":
        sys.stdout.write(json.dumps(acc, indent=2) + "\n")
    else:
        sys.stdout.write(accuracy_to_text(acc))
    return 0


COMMANDS = {"analyze": cmd_analyze, "corpus": cmd_corpus, "score-model": cmd_score_model}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING if args.verbose == 0 else logging.INFO if args.verbose == 1 else logging.DEBUG
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return COMMANDS[args.command](args)
    except (LabelMismatch, SchemaError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except SsrlintError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
