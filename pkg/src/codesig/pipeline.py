"""Index, train, classify and evaluate workflows over whole source trees."""

from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Iterable, Sequence, TypeVar

from . import classify as cl
from .classify import Metric, RankedResult
from .corpus import (
    FileDims,
    FileEntry,
    IndexValidationError,
    KnowledgeBaseIndex,
    ScannedFile,
    file_dimensions,
    scan_target,
)
from .lineloc import (
    AffineSpec,
    learn_line_matrix,
    lookup_lines,
    most_probable_lines,
    prob_matrix_from,
    with_context,
)
from .model import KnowledgeBase, majority_location_types
from .nlp import DEFAULT_DELTA, classify_nlp, train_lm
from .report import Finding, StatsTable, score_guesses, score_probability
from .signal import DEFAULT_NGRAM, DEFAULT_WINDOW, FeatureVector, file_features

log = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")

NLP_CONFIG_ORDER_NAMES = {1: "unigram", 2: "bigram", 3: "trigram"}


def _map(fn: Callable[[T], R], items: Sequence[T], jobs: int) -> list[R]:
    if jobs > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def config_string(scheme: str, pipeline: str, metric: Metric | None = None, order: int = 1) -> str:
    """Option string naming one run, e.g. ``-cweid -nopreprep -raw -fft -cheb``."""
    parts = ["-cweid"] if scheme == "CWE" else []
    parts.append("-nopreprep")
    if pipeline == "signal":
        parts += ["-raw", "-fft", f"-{metric}"]
    else:
        parts += ["-char", f"-{NLP_CONFIG_ORDER_NAMES.get(order, f'order{order}')}", "-add-delta"]
    return " ".join(parts)


def config_prefix(scheme: str, pipeline: str, order: int = 1) -> str:
    """Config string without the metric, naming a stats file covering several metrics."""
    if pipeline == "nlp":
        return config_string(scheme, pipeline, order=order)
    return config_string(scheme, pipeline, Metric("eucl")).rsplit(" ", 1)[0]


def compact(config: str) -> str:
    """File-name form of a config string: ``-nopreprep -raw -fft -cheb`` -> ``noprepreprawfftcheb``."""
    return "".join(ch for ch in config if ch.isalnum() or ch == ".")


def build_index(
    root: str | os.PathLike,
    extensions: Iterable[str] = (),
    case_name: str = "",
    jobs: int = 1,
) -> KnowledgeBaseIndex:
    """Meta-index skeleton of a tree: dimensions filled, no annotations."""
    files = scan_target(root, extensions, jobs)
    return KnowledgeBaseIndex(case_name or Path(root).resolve().name, tuple(FileEntry(f.path, f.dims) for f in files))


def read_indexed(
    index: KnowledgeBaseIndex,
    root: str | os.PathLike,
    jobs: int = 1,
    check_dims: bool = True,
) -> list[ScannedFile]:
    """Load the files an index refers to, relative to ``root``."""
    root = Path(root)

    def load(entry: FileEntry) -> ScannedFile:
        data = (root / entry.path).read_bytes()
        dims = file_dimensions(data)
        if check_dims and dims != entry.dims:
            raise IndexValidationError(f"{entry.path}: index dimensions {entry.dims} do not match file {dims}")
        return ScannedFile(entry.path, data, dims)

    return _map(load, list(index.entries), jobs)


def _labelled(index: KnowledgeBaseIndex, scheme: str) -> list[tuple[str, list[str]]]:
    return [(e.path, e.classes(scheme)) for e in index.entries if e.classes(scheme)]


def train_knowledge_base(
    index: KnowledgeBaseIndex,
    files: Sequence[ScannedFile],
    pipeline: str = "signal",
    ngram: int = DEFAULT_NGRAM,
    window: int = DEFAULT_WINDOW,
    order: int = 1,
    delta: float = DEFAULT_DELTA,
    jobs: int = 1,
) -> KnowledgeBase:
    """Train one model per class scheme present in the index annotations."""
    kb = KnowledgeBase(pipeline, index.case_name, ngram, window)
    content = {f.path: f.content for f in files}
    kb.lines = learn_line_matrix(index)

    features: dict[str, FeatureVector] = {}
    if pipeline == "signal":
        needed = sorted({p for scheme in cl.SCHEMES for p, _ in _labelled(index, scheme)})
        vecs = _map(lambda p: file_features(content[p], ngram, window), needed, jobs)
        features = dict(zip(needed, vecs))

    for scheme in cl.SCHEMES:
        labelled = _labelled(index, scheme)
        if not labelled:
            continue
        examples = [(cid, path) for path, classes in labelled for cid in classes]
        kb.location_types[scheme] = majority_location_types(index, scheme)
        if pipeline == "signal":
            pairs = [(cid, features[path]) for cid, path in examples]
            model = cl.train(pairs, scheme)
            kb.clusters[scheme] = model
            kb.thresholds[scheme] = {
                name: cl.self_distance(model, pairs, Metric(name)) for name in cl.METRIC_NAMES
            }
        else:
            kb.language[scheme] = train_lm(((cid, content[path]) for cid, path in examples), order, delta, scheme)
        log.info("trained %s %s model: %d classes from %d files", pipeline, scheme, len({c for c, _ in examples}), len(labelled))
    if not kb.schemes():
        raise IndexValidationError("index has no annotated files to train on")
    return kb


@dataclass(frozen=True)
class RunOptions:
    scheme: str = "CVE"
    metrics: tuple[Metric, ...] = (Metric("eucl"),)
    threshold: float | str = math.inf  # a number, or "auto" for the trained self-distance
    delta: float | None = None  # NLP smoothing override
    top_n: int = 2
    report_top: int = 1
    line_spec: AffineSpec = AffineSpec.from_class(1)
    line_top_k: int = 0  # >0: report the k most probable learned lines instead of all
    jobs: int = 1


def _configs(kb: KnowledgeBase, opts: RunOptions) -> list[tuple[str, Metric | None]]:
    if kb.pipeline == "signal":
        return [(config_string(opts.scheme, "signal", m), m) for m in opts.metrics]
    order = kb.language[opts.scheme].order
    return [(config_string(opts.scheme, "nlp", order=order), None)]


def _theta(kb: KnowledgeBase, opts: RunOptions, metric: Metric | None) -> float:
    if opts.threshold != "auto":
        return float(opts.threshold)
    if metric is None:
        raise ValueError("automatic threshold calibration is only available for the signal pipeline")
    table = kb.thresholds.get(opts.scheme, {})
    if str(metric) not in table:
        raise ValueError(f"no calibrated threshold stored for metric {metric}")
    return table[str(metric)]


def classify_files(kb: KnowledgeBase, files: Sequence[ScannedFile], opts: RunOptions) -> dict[str, list[RankedResult]]:
    """Rank every file under each configuration; results keep the file order."""
    if opts.scheme not in kb.schemes():
        raise ValueError(f"model has no {opts.scheme} classes (trained schemes: {', '.join(kb.schemes()) or 'none'})")
    out: dict[str, list[RankedResult]] = {}
    if kb.pipeline == "signal":
        model = kb.clusters[opts.scheme]
        vecs = _map(lambda f: file_features(f.content, kb.ngram, kb.window), files, opts.jobs)
        for label, metric in _configs(kb, opts):
            out[label] = [
                cl.classify(model, v, metric, opts.top_n, f.path, label) for f, v in zip(files, vecs)
            ]
    else:
        lm = kb.language[opts.scheme]
        if opts.delta is not None:
            lm = replace(lm, delta=opts.delta)
        (label, _), = _configs(kb, opts)
        out[label] = _map(lambda f: classify_nlp(lm, f.content, opts.top_n, f.path, label), files, opts.jobs)
    return out


def _lines_for(kb: KnowledgeBase, dims: FileDims, opts: RunOptions, prob_matrix) -> tuple:
    if dims.lines < 1:
        return ()
    ctx = opts.line_spec.context
    if opts.line_top_k > 0:
        best = most_probable_lines(prob_matrix, dims, opts.line_top_k)
        if best:
            return tuple(with_context(line, dims, ctx) for line, _ in best)
    found = sorted(set(lookup_lines(kb.lines, dims, opts.line_spec)))
    return tuple(with_context(line, dims, ctx) for line in found)


def findings(
    kb: KnowledgeBase,
    files: Sequence[ScannedFile],
    results: dict[str, list[RankedResult]],
    opts: RunOptions,
) -> dict[str, list[Finding]]:
    """Threshold each configuration's results and turn survivors into findings."""
    dims = {f.path: f.dims for f in files}
    prob_matrix = None
    if opts.line_top_k > 0:
        prob_matrix = prob_matrix_from(kb.lines)
    out: dict[str, list[Finding]] = {}
    metrics = dict(_configs(kb, opts))
    for label, ranked in results.items():
        theta = _theta(kb, opts, metrics.get(label))
        batch = []
        for res in ranked:
            kept = cl.threshold_filter(res, theta)
            for hyp in kept.hypotheses[: opts.report_top]:
                batch.append(
                    Finding(
                        path=res.query_path,
                        class_id=hyp.class_id,
                        score=hyp.score,
                        rank_probability=score_probability(hyp.score),
                        lines=_lines_for(kb, dims[res.query_path], opts, prob_matrix),
                        location_type=kb.location_type(opts.scheme, hyp.class_id),
                        tool_config=label,
                    )
                )
        out[label] = batch
    return out


def evaluate(
    kb: KnowledgeBase,
    index: KnowledgeBaseIndex,
    files: Sequence[ScannedFile],
    opts: RunOptions,
) -> tuple[dict[str, list[RankedResult]], dict[str, list[Finding]], StatsTable]:
    """Classify the annotated files of ``index`` and score them against their labels."""
    labelled = {p for p, _ in _labelled(index, opts.scheme)}
    subset = [f for f in files if f.path in labelled]
    results = classify_files(kb, subset, opts)
    found = findings(kb, subset, results, opts)
    table = score_guesses([r for rs in results.values() for r in rs], index, opts.scheme)
    return results, found, table
