"""Per-class character n-gram models with add-delta smoothing."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .classify import SCHEMES, RankedResult, _rank

DEFAULT_DELTA = 0.5


@dataclass
class GramCounts:
    """Sparse count table: sorted gram codes with their counts."""

    grams: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    counts: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def merge(self, grams: np.ndarray, counts: np.ndarray) -> "GramCounts":
        g = np.concatenate([self.grams, grams])
        c = np.concatenate([self.counts, counts])
        uniq, inv = np.unique(g, return_inverse=True)
        return GramCounts(uniq, np.bincount(inv, weights=c, minlength=len(uniq)).astype(np.int64))

    def lookup(self, grams: np.ndarray) -> np.ndarray:
        if len(self.grams) == 0:
            return np.zeros(len(grams), dtype=np.int64)
        pos = np.searchsorted(self.grams, grams)
        pos = np.minimum(pos, len(self.grams) - 1)
        return np.where(self.grams[pos] == grams, self.counts[pos], 0)

    def count(self, gram: int) -> int:
        return int(self.lookup(np.array([gram], dtype=np.int64))[0])


@dataclass
class LanguageModel:
    scheme: str
    order: int = 1
    delta: float = DEFAULT_DELTA
    vocab_size: int = 256
    tables: dict[str, GramCounts] = field(default_factory=dict)

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        if self.order < 1:
            raise ValueError(f"order must be >= 1, got {self.order}")
        if not self.delta > 0:
            raise ValueError(f"delta must be > 0, got {self.delta}")

    def class_ids(self) -> list[str]:
        return sorted(self.tables)


def gram_codes(text: bytes, order: int) -> np.ndarray:
    """Big-endian integer code of every ``order``-byte gram, step 1."""
    raw = np.frombuffer(text, dtype=np.uint8).astype(np.int64)
    n = max(0, len(raw) - order + 1)
    codes = np.zeros(n, dtype=np.int64)
    for i in range(order):
        codes = codes * 256 + raw[i : i + n]
    return codes


def train_lm(
    examples: Iterable[tuple[str, bytes]],
    order: int = 1,
    delta: float = DEFAULT_DELTA,
    scheme: str = "CVE",
    vocab_size: int | None = None,
) -> LanguageModel:
    if not 1 <= order <= 7:
        raise ValueError(f"order must be in [1, 7], got {order}")
    model = LanguageModel(scheme, order, delta, vocab_size or 256**order)
    for cid, text in examples:
        grams, counts = np.unique(gram_codes(text, order), return_counts=True)
        model.tables[cid] = model.tables.get(cid, GramCounts()).merge(grams, counts)
    return model


def _as_code(gram: bytes | int) -> int:
    if isinstance(gram, (bytes, bytearray)):
        return int.from_bytes(gram, "big")
    return int(gram)


def gram_probability(model: LanguageModel, class_id: str, gram: bytes | int) -> float:
    """Add-delta estimate (c + delta) / (N + delta * V)."""
    try:
        table = model.tables[class_id]
    except KeyError:
        raise KeyError(f"unknown class {class_id!r}") from None
    return (table.count(_as_code(gram)) + model.delta) / (table.total + model.delta * model.vocab_size)


def log_likelihoods(model: LanguageModel, query: bytes) -> tuple[list[str], np.ndarray]:
    """Negative log-likelihood of ``query`` under each class, in class-id order."""
    ids = model.class_ids()
    grams, mult = np.unique(gram_codes(query, model.order), return_counts=True)
    scores = np.zeros(len(ids))
    for i, cid in enumerate(ids):
        table = model.tables[cid]
        denom = table.total + model.delta * model.vocab_size
        logp = np.log(table.lookup(grams) + model.delta) - np.log(denom)
        scores[i] = -float(np.dot(mult, logp))
    return ids, scores


def classify_nlp(
    model: LanguageModel,
    query: bytes,
    top_n: int = 2,
    query_path: str = "",
    label: str = "nlp",
) -> RankedResult:
    if not model.tables:
        raise ValueError("cannot classify with an empty language model")
    ids, scores = log_likelihoods(model, query)
    # + 0.0 turns the -0.0 of an empty query into 0.0
    return RankedResult(_rank(ids, scores + 0.0, top_n), label, query_path)
