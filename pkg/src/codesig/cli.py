"""Command-line entry point: ``codesig {index,train,classify,evaluate}``.

Flags mirror the classic option strings, so a results-table row such as
``-cweid -nopreprep -raw -fft -cheb`` becomes
``codesig evaluate --cweid --nopreprep --raw --fft --cheb ...``.

Exit codes: 0 success, 1 usage, 2 I/O, 3 validation.
"""

from __future__ import annotations

import argparse
import logging
import math
import os
import sys
from pathlib import Path

from . import __version__
from .classify import Metric
from .corpus import IndexParseError, IndexValidationError, load_index, save_index, scan_target
from .lineloc import AffineSpec
from .model import ModelFormatError, dumps, loads
from .nlp import DEFAULT_DELTA
from .pipeline import (
    RunOptions,
    build_index,
    classify_files,
    compact,
    config_prefix,
    evaluate,
    findings,
    read_indexed,
    train_knowledge_base,
)
from .report import emit_report, emit_stats, recall
from .signal import DEFAULT_NGRAM, DEFAULT_WINDOW

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_VALIDATION = 0, 1, 2, 3
OUT_ENV = "CODESIG_OUT"

log = logging.getLogger("codesig")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


class _MetricAction(argparse.Action):
    """Appends a Metric for flags like ``--cheb`` or ``--mink 4``."""

    def __call__(self, parser, namespace, values, option_string=None):
        param = float(values) if values not in (None, []) else None
        try:
            metric = Metric(self.dest.split("_", 1)[1], param)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        metrics = list(getattr(namespace, "metrics", None) or [])
        metrics.append(metric)
        namespace.metrics = metrics
        namespace.signal_flags = [*getattr(namespace, "signal_flags", []), option_string]


def _threshold(text: str):
    if text == "auto":
        return "auto"
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"threshold must be a number or 'auto', got {text!r}") from None


def _add_pipeline_flags(p: argparse.ArgumentParser, with_metrics: bool, train: bool) -> None:
    g = p.add_argument_group("pipeline")
    g.add_argument("--fft", action="store_true", help="signal pipeline: FFT spectral signatures (default)")
    g.add_argument("--raw", action="store_true", help="identity preprocessing (accepted, no-op)")
    g.add_argument("--nopreprep", action="store_true", help="no extra preprocessing (accepted, no-op)")
    g.add_argument("--nlp", action="store_true", help="character n-gram language model pipeline")
    g.add_argument("--char", action="store_true", help="character grams (the only NLP tokenization)")
    g.add_argument("--unigram", dest="order", action="store_const", const=1, help="NLP gram order 1")
    g.add_argument("--bigram", dest="order", action="store_const", const=2, help="NLP gram order 2")
    g.add_argument("--add-delta", dest="delta", type=float, nargs="?", const=DEFAULT_DELTA, metavar="DELTA",
                   help=f"add-delta smoothing constant (default {DEFAULT_DELTA})")
    g.add_argument("--cweid", action="store_true", help="classify by CWE instead of CVE")
    if train:
        g.add_argument("--ngram", type=int, default=None, help=f"signal n-gram size (default {DEFAULT_NGRAM})")
        g.add_argument("--window", type=int, default=None, help=f"FFT window size (default {DEFAULT_WINDOW})")
    if with_metrics:
        m = p.add_argument_group("classifier metrics (repeatable; one report per metric)")
        for name, help_ in (
            ("eucl", "Euclidean"),
            ("cheb", "Chebyshev"),
            ("mink", "Minkowski, optional order p (default 3)"),
            ("hamming", "Hamming, optional tolerance (default 0)"),
            ("diff", "Diff, optional allowance (default 0)"),
            ("cos", "cosine distance"),
        ):
            nargs = "?" if name in ("mink", "hamming", "diff") else 0
            m.add_argument(f"--{name}", dest=f"metric_{name}", action=_MetricAction, nargs=nargs, help=help_)


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("reporting")
    g.add_argument("--threshold", type=_threshold, default=math.inf,
                   help="drop hypotheses scoring above this; 'auto' uses the trained self-distance")
    g.add_argument("--report-top", type=int, default=1, help="hypotheses per file in the report")
    g.add_argument("--line-function", type=int, choices=(1, 2, 3, 4), default=1,
                   help="fallback line estimator class")
    g.add_argument("--context", type=int, default=0, help="lines of context around each reported line")
    g.add_argument("--line-top-k", type=int, default=0, help="report the k most probable learned lines")
    g.add_argument("--seed", type=int, default=0, help="seed for the random line estimator")
    g.add_argument("--out", type=Path, default=None, help=f"output directory (default ${OUT_ENV} or .)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="codesig", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    parser.add_argument("--jobs", type=int, default=1, help="parallel workers for file processing")
    sub = parser.add_subparsers(dest="mode", required=True, parser_class=_Parser)

    p = sub.add_parser("index", help="write a meta-index skeleton for a source tree")
    p.add_argument("--target", type=Path, required=True)
    p.add_argument("--ext", action="append", default=[], help="file suffix filter, repeatable")
    p.add_argument("--case", default="", help="case name (default: target directory name)")
    p.add_argument("--out", type=Path, required=True, help="index file to write")

    p = sub.add_parser("train", help="learn signatures from an annotated index")
    p.add_argument("--index", type=Path, required=True)
    p.add_argument("--root", type=Path, default=None, help="source root (default: the index's directory)")
    p.add_argument("--model", type=Path, required=True, help="model file to write")
    _add_pipeline_flags(p, with_metrics=False, train=True)

    p = sub.add_parser("classify", help="scan a tree and write a findings report")
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("--target", type=Path, required=True)
    p.add_argument("--ext", action="append", default=[])
    _add_pipeline_flags(p, with_metrics=True, train=False)
    _add_run_flags(p)

    p = sub.add_parser("evaluate", help="classify an annotated index and write reports plus stats")
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("--index", type=Path, required=True)
    p.add_argument("--root", type=Path, default=None)
    _add_pipeline_flags(p, with_metrics=True, train=False)
    _add_run_flags(p)
    return parser


def _pipeline(args) -> str | None:
    """The pipeline the flags select, or None when they leave it open."""
    nlp_flags = [f for f, on in (("--nlp", args.nlp), ("--char", args.char),
                                 ("--unigram/--bigram", args.order is not None),
                                 ("--add-delta", args.delta is not None)) if on]
    signal_flags = [f for f, on in (("--fft", args.fft), ("--raw", args.raw),
                                    ("--ngram", getattr(args, "ngram", None) is not None),
                                    ("--window", getattr(args, "window", None) is not None)) if on]
    signal_flags += getattr(args, "signal_flags", [])
    if nlp_flags and signal_flags:
        raise UsageError(f"{', '.join(signal_flags)} cannot be combined with {', '.join(nlp_flags)}")
    if nlp_flags:
        return "nlp"
    if signal_flags:
        return "signal"
    return None


def _out_dir(args) -> Path:
    out = args.out or Path(os.environ.get(OUT_ENV, "."))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_model(args, pipeline: str | None):
    kb = loads(args.model.read_text(encoding="utf-8"))
    if pipeline and pipeline != kb.pipeline:
        raise ValueError(f"model {args.model} was trained for the {kb.pipeline} pipeline, not {pipeline}")
    return kb


def _run_options(args, kb) -> RunOptions:
    metrics = tuple(getattr(args, "metrics", None) or ())
    if kb.pipeline == "signal" and not metrics:
        metrics = (Metric("eucl"),)
    return RunOptions(
        scheme="CWE" if args.cweid else "CVE",
        metrics=metrics,
        threshold=args.threshold,
        delta=args.delta,
        report_top=args.report_top,
        line_spec=AffineSpec.from_class(args.line_function, context=args.context, seed=args.seed),
        line_top_k=args.line_top_k,
        jobs=args.jobs,
    )


def _write_reports(out: Path, found: dict, case: str, thresholded: bool) -> None:
    for label, batch in found.items():
        path = out / f"report-{compact(label)}-{case}.xml"
        path.write_text(emit_report(batch, case, thresholded), encoding="utf-8")
        print(f"{path}: {len(batch)} findings")


def cmd_index(args) -> int:
    index = build_index(args.target, args.ext, args.case, args.jobs)
    args.out.write_text(save_index(index), encoding="utf-8")
    print(f"{args.out}: {len(index.entries)} files")
    return EXIT_OK


def cmd_train(args) -> int:
    pipeline = _pipeline(args) or "signal"
    index = load_index(args.index.read_bytes())
    root = args.root or args.index.parent
    files = read_indexed(index, root, args.jobs)
    kb = train_knowledge_base(
        index,
        files,
        pipeline,
        ngram=args.ngram or DEFAULT_NGRAM,
        window=args.window or DEFAULT_WINDOW,
        order=args.order or 1,
        delta=args.delta if args.delta is not None else DEFAULT_DELTA,
        jobs=args.jobs,
    )
    args.model.write_text(dumps(kb), encoding="utf-8")
    print(f"{args.model}: {pipeline} model, schemes {', '.join(kb.schemes())}")
    return EXIT_OK


def cmd_classify(args) -> int:
    kb = _load_model(args, _pipeline(args))
    opts = _run_options(args, kb)
    files = scan_target(args.target, args.ext, args.jobs)
    results = classify_files(kb, files, opts)
    case = args.target.resolve().name
    _write_reports(_out_dir(args), findings(kb, files, results, opts), case, opts.threshold != math.inf)
    return EXIT_OK


def cmd_evaluate(args) -> int:
    kb = _load_model(args, _pipeline(args))
    opts = _run_options(args, kb)
    index = load_index(args.index.read_bytes())
    files = read_indexed(index, args.root or args.index.parent, args.jobs)
    results, found, table = evaluate(kb, index, files, opts)
    out = _out_dir(args)
    case = index.case_name or args.index.stem
    _write_reports(out, found, case, opts.threshold != math.inf)

    order = kb.language[opts.scheme].order if kb.pipeline == "nlp" else 1
    stats_path = out / f"stats-{compact(config_prefix(opts.scheme, kb.pipeline, order))}-{case}.txt"
    text = emit_stats(table)
    stats_path.write_text(text, encoding="utf-8")
    print(text, end="")
    for label, ranked in results.items():
        hit, total = recall(ranked, index, opts.scheme)
        print(f"{label}: {hit} of {total} classes reported")
    print(f"{stats_path}: written")
    return EXIT_OK


COMMANDS = {"index": cmd_index, "train": cmd_train, "classify": cmd_classify, "evaluate": cmd_evaluate}


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if args.jobs < 1:
            raise UsageError("--jobs must be >= 1")
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        if args.mode == "train" and getattr(args, "metrics", None):
            raise UsageError("metric flags apply to classify and evaluate")
        return COMMANDS[args.mode](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (IndexParseError, IndexValidationError, ModelFormatError, KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
