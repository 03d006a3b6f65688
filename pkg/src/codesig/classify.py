"""Mean-centroid models over feature vectors and nearest-centroid ranking."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .signal import FeatureVector

SCHEMES = ("CVE", "CWE")

METRIC_NAMES = ("eucl", "cheb", "mink", "hamming", "diff", "cos")
_DEFAULT_PARAMS = {"mink": 3.0, "hamming": 0.0, "diff": 0.0}


@dataclass(frozen=True)
class Metric:
    """A distance measure; ``param`` is p for mink, the tolerance for hamming
    and the allowance for diff."""

    name: str
    param: float | None = None

    def __post_init__(self):
        if self.name not in METRIC_NAMES:
            raise ValueError(f"unknown metric {self.name!r}; expected one of {METRIC_NAMES}")
        if self.param is None and self.name in _DEFAULT_PARAMS:
            object.__setattr__(self, "param", _DEFAULT_PARAMS[self.name])
        if self.name == "mink" and self.param < 1:
            raise ValueError(f"Minkowski order must be >= 1, got {self.param}")
        if self.name in ("hamming", "diff") and self.param < 0:
            raise ValueError(f"{self.name} tolerance must be >= 0, got {self.param}")

    @classmethod
    def parse(cls, text: str) -> "Metric":
        """Parse ``name`` or ``name:param``, e.g. ``mink:4``."""
        name, _, param = text.partition(":")
        return cls(name, float(param) if param else None)

    def __str__(self) -> str:
        if self.name in _DEFAULT_PARAMS and self.param != _DEFAULT_PARAMS[self.name]:
            return f"{self.name}:{self.param:g}"
        return self.name


class Hypothesis(NamedTuple):
    class_id: str
    score: float


@dataclass(frozen=True)
class RankedResult:
    hypotheses: tuple[Hypothesis, ...]
    metric: str
    query_path: str = ""

    def __post_init__(self):
        object.__setattr__(self, "hypotheses", tuple(Hypothesis(*h) for h in self.hypotheses))
        ids = [h.class_id for h in self.hypotheses]
        if len(set(ids)) != len(ids):
            raise ValueError(f"duplicate class in ranked result for {self.query_path}")

    def top(self, k: int = 1) -> list[str]:
        return [h.class_id for h in self.hypotheses[:k]]


@dataclass(frozen=True)
class ClusterModel:
    scheme: str
    centroids: dict[str, tuple[np.ndarray, int]] = field(default_factory=dict)

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        sizes = {len(v) for v, _ in self.centroids.values()}
        if len(sizes) > 1:
            raise ValueError(f"centroids have mixed bin counts {sorted(sizes)}")
        for cid, (_, count) in self.centroids.items():
            if count < 1:
                raise ValueError(f"class {cid} has no training examples")

    @property
    def bins(self) -> int:
        for v, _ in self.centroids.values():
            return len(v)
        return 0

    def class_ids(self) -> list[str]:
        return sorted(self.centroids)

    def matrix(self) -> tuple[list[str], np.ndarray]:
        ids = self.class_ids()
        if not ids:
            return ids, np.zeros((0, 0))
        return ids, np.vstack([self.centroids[c][0] for c in ids])


def _values(v) -> np.ndarray:
    return np.asarray(v.values if isinstance(v, FeatureVector) else v, dtype=np.float64)


def train(examples: Iterable[tuple[str, FeatureVector]], scheme: str) -> ClusterModel:
    """Build one mean centroid per class from (class-id, vector) pairs."""
    sums: dict[str, np.ndarray] = {}
    counts: dict[str, int] = {}
    size = None
    for cid, vec in examples:
        v = _values(vec)
        if size is None:
            size = len(v)
        elif len(v) != size:
            raise ValueError(f"feature vector for {cid} has {len(v)} bins, expected {size}")
        if cid in sums:
            sums[cid] = sums[cid] + v
            counts[cid] += 1
        else:
            sums[cid] = v.copy()
            counts[cid] = 1
    if size is None:
        raise ValueError("cannot train on an empty example list")
    return ClusterModel(scheme, {c: (sums[c] / counts[c], counts[c]) for c in sums})


def _pairwise(metric: Metric, rows: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Score ``q`` against every row of ``rows``."""
    diff = np.abs(rows - q)
    name = metric.name
    if name == "eucl":
        return np.sqrt(np.sum(diff * diff, axis=-1))
    if name == "cheb":
        return diff.max(axis=-1) if diff.shape[-1] else np.zeros(diff.shape[:-1])
    if name == "mink":
        p = metric.param
        return np.sum(diff**p, axis=-1) ** (1.0 / p)
    if name == "hamming":
        return np.count_nonzero(diff > metric.param, axis=-1).astype(np.float64)
    if name == "diff":
        return np.where(diff > metric.param, diff, 0.0).sum(axis=-1)
    # cos: one summation path for both operands keeps it exactly symmetric
    dots = np.sum(rows * q, axis=-1)
    norms = np.sqrt(np.sum(rows * rows, axis=-1)) * np.sqrt(np.sum(q * q))
    with np.errstate(invalid="ignore", divide="ignore"):
        sim = np.where(norms > 0, dots / np.where(norms > 0, norms, 1.0), 0.0)
    return np.maximum(0.0, 1.0 - sim)


def distance(metric: Metric | str, a, b) -> float:
    """Non-negative distance between two equal-length vectors."""
    if isinstance(metric, str):
        metric = Metric.parse(metric)
    av, bv = _values(a), _values(b)
    if av.shape != bv.shape:
        raise ValueError(f"vector length mismatch: {av.shape} vs {bv.shape}")
    return float(_pairwise(metric, av[np.newaxis, :], bv)[0])


def _rank(ids: Sequence[str], scores: np.ndarray, top_n: int) -> tuple[Hypothesis, ...]:
    order = sorted(range(len(ids)), key=lambda i: (scores[i], ids[i]))
    return tuple(Hypothesis(ids[i], float(scores[i])) for i in order[:top_n])


def classify(
    model: ClusterModel,
    query: FeatureVector,
    metric: Metric | str,
    top_n: int = 2,
    query_path: str = "",
    label: str | None = None,
) -> RankedResult:
    """Rank the model's classes by distance to ``query``; ties go to the smaller class-id."""
    if isinstance(metric, str):
        metric = Metric.parse(metric)
    if top_n < 1:
        raise ValueError("top_n must be >= 1")
    ids, rows = model.matrix()
    if not ids:
        raise ValueError("cannot classify with an empty model")
    q = _values(query)
    if len(q) != rows.shape[1]:
        raise ValueError(f"query has {len(q)} bins, model has {rows.shape[1]}")
    scores = _pairwise(metric, rows, q)
    return RankedResult(_rank(ids, scores, top_n), label or str(metric), query_path)


def threshold_filter(result: RankedResult, theta: float = math.inf) -> RankedResult:
    """Keep only hypotheses scoring at or below ``theta``."""
    kept = tuple(h for h in result.hypotheses if h.score <= theta)
    return RankedResult(kept, result.metric, result.query_path)


def self_distance(model: ClusterModel, examples: Iterable[tuple[str, FeatureVector]], metric: Metric | str) -> float:
    """Largest distance from a training vector to its own class centroid.

    Used as the calibrated threshold: every trained file stays reportable,
    anything farther from all centroids than this is dropped.
    """
    if isinstance(metric, str):
        metric = Metric.parse(metric)
    worst = 0.0
    for cid, vec in examples:
        centroid = model.centroids[cid][0]
        worst = max(worst, float(_pairwise(metric, centroid[np.newaxis, :], _values(vec))[0]))
    return worst
