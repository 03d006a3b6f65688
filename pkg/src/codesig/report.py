"""XML findings reports and first/second-guess precision tables."""

from __future__ import annotations

import enum
import xml.etree.ElementTree as ET
from collections import defaultdict
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from typing import Iterable, Sequence

from .classify import RankedResult
from .corpus import KnowledgeBaseIndex, LocationType
from .lineloc import LineEstimate

REPORT_FORMAT_VERSION = "1"


def fixed(value: float, places: int = 6) -> str:
    """Fixed-point decimal text, never exponent notation."""
    q = Decimal(1).scaleb(-places)
    text = str(Decimal(repr(float(value))).quantize(q, rounding=ROUND_HALF_UP))
    return "0." + "0" * places if text.startswith("-") and Decimal(text) == 0 else text


def score_probability(score: float) -> float:
    """Map a lower-is-better score in [0, inf) onto (0, 1]."""
    return 1.0 / (1.0 + max(score, 0.0))


@dataclass(frozen=True)
class Finding:
    path: str
    class_id: str
    score: float
    rank_probability: float
    lines: tuple[LineEstimate, ...] = ()
    location_type: LocationType = LocationType.UNKNOWN
    tool_config: str = ""

    def __post_init__(self):
        if not 0.0 <= self.rank_probability <= 1.0:
            raise ValueError(f"rank probability {self.rank_probability} outside [0, 1]")
        object.__setattr__(self, "lines", tuple(LineEstimate(*x) for x in self.lines))
        object.__setattr__(self, "location_type", LocationType(self.location_type))


class Guess(str, enum.Enum):
    FIRST = "1st"
    SECOND = "2nd"


def precision(good: int, bad: int) -> Decimal:
    """100 * good / (good + bad), rounded half-up to two places; 0.00 when empty."""
    if good < 0 or bad < 0:
        raise ValueError("counts must be non-negative")
    if good + bad == 0:
        return Decimal("0.00")
    return (Decimal(100 * good) / Decimal(good + bad)).quantize(Decimal("0.01"), rounding=ROUND_HALF_UP)


@dataclass(frozen=True)
class StatsRow:
    guess: Guess
    key: str
    good: int
    bad: int
    per_class: bool = False
    config: str = ""

    def __post_init__(self):
        object.__setattr__(self, "guess", Guess(self.guess))

    @property
    def precision(self) -> Decimal:
        return precision(self.good, self.bad)

    @property
    def empty(self) -> bool:
        return self.good + self.bad == 0


@dataclass(frozen=True)
class StatsTable:
    rows: tuple[StatsRow, ...] = ()

    def row(self, guess: Guess | str, key: str, config: str | None = None) -> StatsRow:
        """Look up a configuration row, or a class row when ``config`` is given."""
        guess = Guess(guess)
        for r in self.rows:
            if r.guess is guess and r.key == key and (config is None or r.config == config):
                return r
        raise KeyError((guess, key, config))


def score_guesses(
    results: Iterable[RankedResult],
    truth: KnowledgeBaseIndex,
    scheme: str = "CVE",
) -> StatsTable:
    """Count first- and second-guess hits per configuration and per true class.

    A first-guess hit also counts as a second-guess hit. A file with several
    true classes contributes to the row of each of them. Class rows are kept
    separately for each configuration.
    """
    entries = truth.by_path()
    tallies: dict[tuple[Guess, str, bool, str], list[int]] = defaultdict(lambda: [0, 0])
    missing = []
    for res in results:
        entry = entries.get(res.query_path)
        true = set(entry.classes(scheme)) if entry else set()
        if not true:
            missing.append(res.query_path)
            continue
        ranked = res.top(2)
        hits = {
            Guess.FIRST: bool(ranked[:1]) and ranked[0] in true,
            Guess.SECOND: any(c in true for c in ranked[:2]),
        }
        for guess, hit in hits.items():
            keys = [(res.metric, False)] + [(c, True) for c in entry.classes(scheme)]
            for key, per_class in keys:
                tallies[(guess, key, per_class, res.metric)][0 if hit else 1] += 1
    if missing:
        raise KeyError(f"no {scheme} ground truth for: {', '.join(missing)}")
    return StatsTable(
        tuple(StatsRow(g, k, good, bad, pc, cfg) for (g, k, pc, cfg), (good, bad) in tallies.items())
    )


def recall(results: Iterable[RankedResult], truth: KnowledgeBaseIndex, scheme: str = "CVE") -> tuple[int, int]:
    """(true classes reported at least once at rank 1, true classes in the index)."""
    expected = {c for e in truth.entries for c in e.classes(scheme)}
    reported = {r.hypotheses[0].class_id for r in results if r.hypotheses}
    return len(expected & reported), len(expected)


def _ordered(rows: Sequence[StatsRow]) -> list[StatsRow]:
    return sorted(rows, key=lambda r: (-r.precision, r.key))


def emit_stats(table: StatsTable) -> str:
    """Plain-text tables: configuration rows, then per-class rows, best first.

    Class rows get one block per configuration, introduced by a ``#`` line.
    """
    out = ["guess\trun\talgorithms\tgood\tbad\t%"]

    def block(rows: list[StatsRow]) -> None:
        for guess in Guess:
            for run, r in enumerate(_ordered([r for r in rows if r.guess is guess]), 1):
                line = f"{guess.value}\t{run}\t{r.key}\t{r.good}\t{r.bad}\t{r.precision}"
                out.append(line + ("\tempty" if r.empty else ""))

    block([r for r in table.rows if not r.per_class])
    for config in sorted({r.config for r in table.rows if r.per_class}):
        out.append(f"# {config}")
        out.append("guess\trun\tclass\tgood\tbad\t%")
        block([r for r in table.rows if r.per_class and r.config == config])
    return "\n".join(out) + "\n"


def emit_report(findings: Iterable[Finding], case_name: str, thresholded: bool = True) -> str:
    """Render findings as a report document, sorted by path then class."""
    root = ET.Element(
        "report",
        {
            "version": REPORT_FORMAT_VERSION,
            "case": case_name,
            "thresholded": "true" if thresholded else "false",
        },
    )
    for f in sorted(findings, key=lambda f: (f.path, f.class_id, f.tool_config, f.score)):
        w = ET.SubElement(
            root,
            "weakness",
            {
                "path": f.path,
                "class": f.class_id,
                "type": f.location_type.value,
                "score": fixed(f.score),
                "probability": fixed(f.rank_probability),
                "config": f.tool_config,
            },
        )
        for est in f.lines:
            ET.SubElement(w, "line", {"number": str(est.line), "start": str(est.start), "end": str(est.end)})
    ET.indent(root)
    return '<?xml version="1.0" encoding="UTF-8"?>\n' + ET.tostring(root, encoding="unicode") + "\n"
