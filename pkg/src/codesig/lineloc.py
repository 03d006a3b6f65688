"""Weakness line estimation: affine heuristics and learned sparse matrices."""

from __future__ import annotations

import math
import random
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Union

import numpy as np

from .corpus import FileDims, IndexValidationError, KnowledgeBaseIndex

DimFunction = Callable[[FileDims], float]

# component functions selectable by name
COMPONENTS: dict[str, DimFunction] = {
    "zero": lambda d: 0.0,
    "half_lines": lambda d: d.lines / 2,
    "lines": lambda d: float(d.lines),
    "bytes": lambda d: float(d.bytes),
    "words": lambda d: float(d.words),
}

Coefficient = Union[float, Callable[[FileDims], float]]


def _words_per_byte(d: FileDims) -> float:
    return d.words / d.bytes


def _lines_per_byte(d: FileDims) -> float:
    return d.lines / d.bytes


@dataclass(frozen=True)
class AffineSpec:
    """Coefficients and component functions of ceil(kL*f(L) + kB*f(B) + kW*f(W)).

    A coefficient is either a constant or a function of the file dimensions.
    ``f_lines == "random"`` draws uniformly from [1, L] using ``seed``.
    """

    k_lines: Coefficient = 1.0
    k_bytes: Coefficient = 1.0
    k_words: Coefficient = 1.0
    f_lines: str | DimFunction = "half_lines"
    f_bytes: str | DimFunction = "zero"
    f_words: str | DimFunction = "zero"
    context: int = 0
    function_class: int | None = None
    seed: int = 0

    def __post_init__(self):
        if self.context < 0:
            raise ValueError(f"context must be >= 0, got {self.context}")

    @classmethod
    def from_class(cls, function_class: int, context: int = 0, seed: int = 0) -> "AffineSpec":
        """The four predefined non-learning function classes."""
        if function_class == 1:
            k_lines: Coefficient = 1.0
        elif function_class == 2:
            k_lines = _words_per_byte
        elif function_class == 3:
            k_lines = _lines_per_byte
        elif function_class == 4:
            return cls(f_lines="random", context=context, function_class=4, seed=seed)
        else:
            raise ValueError(f"function class must be 1..4, got {function_class}")
        return cls(k_lines=k_lines, context=context, function_class=function_class, seed=seed)


class LineEstimate(NamedTuple):
    line: int
    start: int
    end: int


def _coef(k: Coefficient, dims: FileDims) -> float:
    return k(dims) if callable(k) else float(k)


def _component(f: str | DimFunction, dims: FileDims, seed: int) -> float:
    if callable(f):
        return f(dims)
    if f == "random":
        # seeded per file so estimates do not depend on call order
        rng = random.Random(f"{seed}:{dims.lines}:{dims.bytes}:{dims.words}")
        return float(rng.randint(1, dims.lines))
    try:
        return COMPONENTS[f](dims)
    except KeyError:
        raise ValueError(f"unknown component function {f!r}") from None


def affine_value(dims: FileDims, spec: AffineSpec) -> int:
    """The unclamped ceiling of the affine combination."""
    total = (
        _coef(spec.k_lines, dims) * _component(spec.f_lines, dims, spec.seed)
        + _coef(spec.k_bytes, dims) * _component(spec.f_bytes, dims, spec.seed)
        + _coef(spec.k_words, dims) * _component(spec.f_words, dims, spec.seed)
    )
    return math.ceil(total)


def with_context(line: int, dims: FileDims, context: int) -> LineEstimate:
    return LineEstimate(line, max(1, line - context), min(dims.lines, line + context))


def estimate_line_affine(dims: FileDims, spec: AffineSpec) -> LineEstimate:
    if dims.lines < 1:
        raise ValueError("cannot place a line in a file with no lines")
    line = min(max(affine_value(dims, spec), 1), dims.lines)
    return with_context(line, dims, spec.context)


DimsKey = tuple[int, int, int]


def _annotated_lines(index: KnowledgeBaseIndex):
    for entry in index.entries:
        for ann in entry.annotations:
            if ann.line is None:
                continue
            if not 1 <= ann.line <= entry.dims.lines:
                raise IndexValidationError(
                    f"{entry.path}: weakness line {ann.line} outside [1, {entry.dims.lines}]"
                )
            yield entry.dims.key(), ann.line


@dataclass
class LineMatrix:
    """Sparse (lines, bytes, words) -> learned line numbers; absent cells are empty."""

    cells: dict[DimsKey, list[int]] = field(default_factory=dict)

    def add(self, key: DimsKey, line: int) -> None:
        if not 1 <= line <= key[0]:
            raise IndexValidationError(f"line {line} outside [1, {key[0]}] for dims {key}")
        self.cells.setdefault(key, []).append(line)

    def get(self, key: DimsKey, ignore_words: bool = False) -> list[int]:
        if key in self.cells:
            return list(self.cells[key])
        if ignore_words:
            hits = [k for k in sorted(self.cells) if k[:2] == key[:2]]
            return [line for k in hits for line in self.cells[k]]
        return []


def learn_line_matrix(index: KnowledgeBaseIndex) -> LineMatrix:
    matrix = LineMatrix()
    for key, line in _annotated_lines(index):
        matrix.add(key, line)
    return matrix


def lookup_lines(
    matrix: LineMatrix,
    dims: FileDims,
    fallback: AffineSpec,
    ignore_words: bool = False,
) -> list[int]:
    """Learned lines for these dimensions, else the single affine estimate."""
    if dims.lines < 1:
        raise ValueError("cannot place a line in a file with no lines")
    stored = matrix.get(dims.key(), ignore_words)
    if stored:
        return stored
    return [estimate_line_affine(dims, fallback).line]


@dataclass
class LineProbMatrix:
    """Per-cell line-number counts, read back as probability vectors over 1..L."""

    cells: dict[DimsKey, Counter] = field(default_factory=dict)
    delta: float | None = None

    def __post_init__(self):
        if self.delta is not None and not self.delta > 0:
            raise ValueError(f"smoothing delta must be > 0, got {self.delta}")

    def probabilities(self, key: DimsKey) -> np.ndarray:
        """Index i holds the probability of line i + 1."""
        counts = self.cells.get(key)
        if counts is None:
            return np.zeros(0)
        lines = key[0]
        vec = np.zeros(lines)
        for line, c in counts.items():
            vec[line - 1] = c
        total = sum(counts.values())
        if self.delta is None:
            return vec / total
        return (vec + self.delta) / (total + self.delta * lines)


def learn_line_prob_matrix(index: KnowledgeBaseIndex, delta: float | None = None) -> LineProbMatrix:
    """Count weakness lines per cell; ``delta`` enables add-delta smoothing."""
    return prob_matrix_from(learn_line_matrix(index), delta)


def prob_matrix_from(matrix: LineMatrix, delta: float | None = None) -> LineProbMatrix:
    return LineProbMatrix({key: Counter(found) for key, found in matrix.cells.items()}, delta)


def most_probable_lines(matrix: LineProbMatrix, dims: FileDims, k: int = 1) -> list[tuple[int, float]]:
    probs = matrix.probabilities(dims.key())
    candidates = [(i + 1, float(p)) for i, p in enumerate(probs) if p > 0]
    candidates.sort(key=lambda lp: (-lp[1], lp[0]))
    return candidates[:k]
