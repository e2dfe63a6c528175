"""Command-line driver.

Exit status: 0 on success (warnings allowed), 1 when any error diagnostic was
reported, 2 on usage or file errors.  Diagnostics go to stderr, data to
stdout or ``--out``.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Optional, Sequence

from .analysis import MODES, Mode
from .frontend import FrontendError, collect_sources, has_errors, load_corpus
from .graph import DEFAULT_DEPTH_CAP, GraphError, build_extended_call_graph, export_graph
from .metrics import count_unsafe_abstractions, snapshot_diff
from .pipeline import cdf_table, metrics_report, verdicts_by_mode
from .plotting import plot_abi_distribution, plot_cdf
from .report import (
    cdf_csv, diff_csv, diff_json, dumps_json, metrics_csv, read_metrics_counts, verdicts_csv,
    verdicts_json,
)
from .synth import random_corpus

EXIT_OK, EXIT_DIAGNOSTICS, EXIT_USAGE = 0, 1, 2

FORMATS = {
    "check": ("json",),
    "graph": ("json",),
    "analyze": ("json", "csv"),
    "metrics": ("csv",),
    "diff": ("csv", "json"),
}


class UsageError(Exception):
    pass


def _depth_cap(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"--depth-cap: not an integer: {text!r}")
    if value < 1:
        raise argparse.ArgumentTypeError("--depth-cap must be at least 1")
    return value


def _cap_percentile(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"--cap-percentile: not a number: {text!r}")
    if not 0 < value <= 100:
        raise argparse.ArgumentTypeError("--cap-percentile must lie in (0, 100]")
    return value


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--mode", choices=["conservative", "optimistic", "both"],
                        default="both")
    common.add_argument("--trusted", default="",
                        help="comma-separated packages whose bodies are not traversed")
    common.add_argument("--depth-cap", type=_depth_cap, default=DEFAULT_DEPTH_CAP)
    common.add_argument("--cap-percentile", type=_cap_percentile, default=100.0)
    common.add_argument("--format", choices=["json", "csv"], default=None)
    common.add_argument("--early-termination", action="store_true",
                        help="stop traversing a function at its first unsafe block")
    common.add_argument("--out", type=Path, default=None,
                        help="output file (a directory for metrics)")

    parser = argparse.ArgumentParser(prog="unsafeprop", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in [
        ("check", "parse and report unsafe-discipline diagnostics"),
        ("graph", "emit the merged extended call graph"),
        ("analyze", "emit per-function verdicts"),
        ("metrics", "emit package metrics, CDFs and figures"),
    ]:
        p = sub.add_parser(name, parents=[common], help=help_text)
        p.add_argument("inputs", nargs="+", help=".ml files or directories")
    p = sub.add_parser("diff", parents=[common], help="compare two snapshots")
    p.add_argument("old", help="corpus directory or metrics CSV")
    p.add_argument("new", help="corpus directory or metrics CSV")
    p = sub.add_parser("synth", help="write a random well-formed corpus")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, required=True)
    return parser


def _emit(text: str, out: Optional[Path]) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text, encoding="utf-8", newline="\n")


def _load(paths: Sequence[str]):
    """Corpus from paths, printing diagnostics; None when errors were found."""
    try:
        sources = collect_sources(paths)
    except FileNotFoundError as exc:
        raise UsageError(f"no such file or directory: {exc.args[0]}")
    try:
        corpus, diagnostics = load_corpus(sources)
    except FrontendError as exc:
        diagnostics, corpus = exc.diagnostics, None
    for d in diagnostics:
        print(d, file=sys.stderr)
    if corpus is None or has_errors(diagnostics):
        return None
    return corpus


def _trusted(args) -> tuple[str, ...]:
    return tuple(sorted({t.strip() for t in args.trusted.split(",") if t.strip()}))


def _modes(args) -> tuple[Mode, ...]:
    return MODES if args.mode == "both" else (Mode(args.mode),)


def _graph(args, corpus):
    try:
        return build_extended_call_graph(corpus, _trusted(args), args.depth_cap,
                                         args.early_termination)
    except GraphError as exc:
        raise UsageError(str(exc))


def cmd_check(args) -> int:
    corpus = _load(args.inputs)
    if corpus is None:
        return EXIT_DIAGNOSTICS
    n_fns = len(corpus.functions)
    _emit(f"{len(corpus.packages)} packages, {n_fns} functions: ok\n", args.out)
    return EXIT_OK


def cmd_graph(args) -> int:
    corpus = _load(args.inputs)
    if corpus is None:
        return EXIT_DIAGNOSTICS
    _emit(dumps_json(export_graph(_graph(args, corpus))), args.out)
    return EXIT_OK


def cmd_analyze(args) -> int:
    corpus = _load(args.inputs)
    if corpus is None:
        return EXIT_DIAGNOSTICS
    verdicts = verdicts_by_mode(corpus, _graph(args, corpus), _modes(args))
    rows = [v for per_mode in verdicts.values() for v in per_mode.values()]
    text = verdicts_csv(rows) if args.format == "csv" else verdicts_json(rows)
    _emit(text, args.out)
    return EXIT_OK


def cmd_metrics(args) -> int:
    corpus = _load(args.inputs)
    if corpus is None:
        return EXIT_DIAGNOSTICS
    report = metrics_report(corpus, _trusted(args), graph=_graph(args, corpus))
    if args.out is None:
        _emit(metrics_csv(report), None)
        return EXIT_OK
    out: Path = args.out
    out.mkdir(parents=True, exist_ok=True)
    _emit(metrics_csv(report), out / "metrics.csv")
    cdfs = cdf_table(report, args.cap_percentile)
    for name, series in cdfs.items():
        _emit(cdf_csv(series), out / f"cdf_{name}.csv")
    if cdfs:
        plot_cdf({"blocks": cdfs["blocks"]}, out / "cdf_blocks.png", "unsafe blocks per package")
        plot_cdf({"declared unsafe": cdfs["unsafe_fns"]}, out / "cdf_unsafe_fns.png",
                 "declared-unsafe functions per package")
        plot_cdf({"conservative": cdfs["possibly_unsafe_conservative"],
                  "optimistic": cdfs["possibly_unsafe_optimistic"]},
                 out / "cdf_possibly_unsafe.png", "possibly-unsafe functions per package")
        plot_abi_distribution(report.abis, out / "abi_census.png")
    return EXIT_OK


def _snapshot(path: str, args):
    p = Path(path)
    if p.is_file() and p.suffix == ".csv":
        try:
            return read_metrics_counts(p)
        except ValueError as exc:
            raise UsageError(str(exc))
    corpus = _load([path])
    if corpus is None:
        return None
    return {pkg.name: count_unsafe_abstractions(pkg) for pkg in corpus.packages}


def cmd_diff(args) -> int:
    old, new = _snapshot(args.old, args), _snapshot(args.new, args)
    if old is None or new is None:
        return EXIT_DIAGNOSTICS
    diff = snapshot_diff(old, new)
    if diff.unmatched:
        print("unmatched packages: " + ", ".join(diff.unmatched), file=sys.stderr)
    _emit(diff_json(diff) if args.format == "json" else diff_csv(diff), args.out)
    return EXIT_OK


def cmd_synth(args) -> int:
    out: Path = args.out
    out.mkdir(parents=True, exist_ok=True)
    for name, text in random_corpus(args.seed).items():
        _emit(text, out / name)
    return EXIT_OK


COMMANDS = {
    "check": cmd_check, "graph": cmd_graph, "analyze": cmd_analyze,
    "metrics": cmd_metrics, "diff": cmd_diff, "synth": cmd_synth,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Run one subcommand and return its exit status."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    fmt = getattr(args, "format", None)
    if fmt is not None and fmt not in FORMATS.get(args.command, ()):
        print(f"unsafeprop: --format {fmt} is not supported by {args.command}",
              file=sys.stderr)
        return EXIT_USAGE
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"unsafeprop: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"unsafeprop: {exc.filename or ''}: {exc.strerror}", file=sys.stderr)
        return EXIT_USAGE


run = main
