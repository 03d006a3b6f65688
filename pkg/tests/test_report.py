import random
import re
import xml.etree.ElementTree as ET
from decimal import Decimal

import pytest

from codesig.classify import RankedResult
from codesig.corpus import FileDims, FileEntry, KnowledgeBaseIndex, WeaknessAnnotation
from codesig.lineloc import LineEstimate
from codesig.report import (
    Finding,
    StatsRow,
    StatsTable,
    emit_report,
    emit_stats,
    fixed,
    precision,
    recall,
    score_guesses,
)


@pytest.mark.parametrize(
    "good, bad, pct",
    [(38, 3, "92.68"), (10, 1, "90.91"), (5, 0, "100.00"), (0, 0, "0.00"), (1, 7, "12.50"), (1, 199, "0.50")],
)
def test_precision(good, bad, pct):
    assert precision(good, bad) == Decimal(pct)
    assert str(precision(good, bad)) == pct


def test_half_up_rounding():
    # 100 * 1 / 8 = 12.5 exactly; 100 / 16 = 6.25 -> 6.25; 1/400 = 0.25
    assert str(precision(1, 15)) == "6.25"
    # 100 * 1/ 1600 = 0.0625 -> 0.06 ; 100 * 3 / 1600 = 0.1875 -> 0.19
    assert str(precision(1, 1599)) == "0.06"
    assert str(precision(3, 1597)) == "0.19"
    # 100 * 1 / 200 = 0.5 exactly; 0.005 boundary: 1/20000 = 0.005 -> 0.01
    assert str(precision(1, 19999)) == "0.01"


def test_empty_row_flagged():
    assert StatsRow("1st", "x", 0, 0).empty
    assert not StatsRow("1st", "x", 1, 0).empty


def _truth(n, classes_of):
    return KnowledgeBaseIndex(
        "t",
        tuple(
            FileEntry(f"f{i}", FileDims(1, 1, 1), tuple(WeaknessAnnotation(cve_id=c) for c in classes_of(i)))
            for i in range(n)
        ),
    )


def test_first_guess_hit_counts_twice():
    truth = _truth(1, lambda i: ["A"])
    t = score_guesses([RankedResult((("A", 0.1), ("B", 0.2)), "cfg", "f0")], truth)
    assert (t.row("1st", "cfg").good, t.row("2nd", "cfg").good) == (1, 1)


def test_second_guess_rescue():
    truth = _truth(1, lambda i: ["A"])
    t = score_guesses([RankedResult((("B", 0.1), ("A", 0.2)), "cfg", "f0")], truth)
    assert (t.row("1st", "cfg").good, t.row("1st", "cfg").bad) == (0, 1)
    assert (t.row("2nd", "cfg").good, t.row("2nd", "cfg").bad) == (1, 0)


def test_wireshark_like_table():
    truth = _truth(41, lambda i: ["A"])
    results = [RankedResult(((("A" if i < 38 else "B"), 0.1),), "-diff", f"f{i}") for i in range(41)]
    row = score_guesses(results, truth).row("1st", "-diff")
    assert (row.good, row.bad, str(row.precision)) == (38, 3, "92.68")


def test_per_class_rows_and_multiple_truths():
    truth = _truth(2, lambda i: ["A", "B"] if i == 0 else ["B"])
    results = [
        RankedResult((("B", 0.1),), "cfg", "f0"),
        RankedResult((("A", 0.1),), "cfg", "f1"),
    ]
    t = score_guesses(results, truth)
    assert (t.row("1st", "A", "cfg").good, t.row("1st", "A", "cfg").bad) == (1, 0)
    assert (t.row("1st", "B", "cfg").good, t.row("1st", "B", "cfg").bad) == (1, 1)


def test_missing_truth_is_an_error():
    with pytest.raises(KeyError, match="ghost"):
        score_guesses([RankedResult((("A", 1),), "cfg", "ghost")], _truth(1, lambda i: ["A"]))


def test_second_guess_dominates_random_sets():
    r = random.Random(1)
    labels = [f"C{i}" for i in range(6)]
    for _ in range(200):
        n = r.randrange(1, 30)
        truth = _truth(n, lambda i: r.sample(labels, r.randrange(1, 3)))
        results = [
            RankedResult(tuple((c, float(k)) for k, c in enumerate(r.sample(labels, r.randrange(0, 4)))), cfg, f"f{i}")
            for cfg in ("x", "y")
            for i in range(n)
        ]
        t = score_guesses(results, truth)
        for row in t.rows:
            if row.guess.value == "1st":
                second = t.row("2nd", row.key, row.config)
                assert second.good >= row.good
                assert second.precision >= row.precision


def test_recall():
    truth = _truth(3, lambda i: [["A"], ["B"], ["C"]][i])
    results = [RankedResult((("A", 0),), "c", "f0"), RankedResult((("A", 0),), "c", "f1"), RankedResult((), "c", "f2")]
    assert recall(results, truth) == (1, 3)


def test_stats_empty_table():
    assert emit_stats(StatsTable()) == "guess\trun\talgorithms\tgood\tbad\t%\n"


def test_stats_ordering():
    rows = (
        StatsRow("1st", "-eucl", 29, 12),
        StatsRow("2nd", "-diff", 39, 2),
        StatsRow("1st", "-diff", 38, 3),
        StatsRow("1st", "-cheb", 38, 3),
        StatsRow("1st", "-none", 0, 0),
    )
    lines = emit_stats(StatsTable(rows)).splitlines()
    assert lines[1] == "1st\t1\t-cheb\t38\t3\t92.68"
    assert lines[2] == "1st\t2\t-diff\t38\t3\t92.68"
    assert lines[3] == "1st\t3\t-eucl\t29\t12\t70.73"
    assert lines[4] == "1st\t4\t-none\t0\t0\t0.00\tempty"
    assert lines[5] == "2nd\t1\t-diff\t39\t2\t95.12"


def test_stats_class_blocks():
    rows = (StatsRow("1st", "cfg", 1, 1), StatsRow("1st", "CVE-1", 1, 0, True, "cfg"), StatsRow("1st", "CVE-2", 0, 1, True, "cfg"))
    text = emit_stats(StatsTable(rows))
    assert text.endswith("# cfg\nguess\trun\tclass\tgood\tbad\t%\n1st\t1\tCVE-1\t1\t0\t100.00\n1st\t2\tCVE-2\t0\t1\t0.00\n")


@pytest.mark.parametrize(
    "value, text",
    [(0.00041997357, "0.000420"), (4.199735736674989e-4, "0.000420"), (1e-12, "0.000000"), (-0.0, "0.000000"),
     (12345.5, "12345.500000"), (1.0, "1.000000"), (2.5e-7, "0.000000"), (5e-7, "0.000001")],
)
def test_fixed_point(value, text):
    assert fixed(value) == text


def test_empty_report_is_valid():
    root = ET.fromstring(emit_report([], "fixed-case"))
    assert root.tag == "report" and root.get("case") == "fixed-case" and len(root) == 0


def _finding(path, cls, p=0.00041997357):
    return Finding(path, cls, 1.5, p, (LineEstimate(3, 1, 5),), "sink", "-nopreprep -raw -fft -cheb")


def test_report_content_and_no_exponents():
    text = emit_report([_finding("a.c", "CVE-1")], "case")
    w = ET.fromstring(text).find("weakness")
    assert w.get("probability") == "0.000420"
    assert w.get("score") == "1.500000"
    assert w.get("type") == "sink"
    assert w.find("line").attrib == {"number": "3", "start": "1", "end": "5"}
    assert not re.search(r'"[-+0-9.]+[eE][-+]?[0-9]+"', text)


def test_report_is_order_independent():
    fs = [_finding("b.c", "CVE-1"), _finding("a.c", "CVE-2"), _finding("a.c", "CVE-1")]
    assert emit_report(fs, "c") == emit_report(fs[::-1], "c")
    paths = [(w.get("path"), w.get("class")) for w in ET.fromstring(emit_report(fs, "c"))]
    assert paths == [("a.c", "CVE-1"), ("a.c", "CVE-2"), ("b.c", "CVE-1")]


def test_probability_bounds():
    with pytest.raises(ValueError):
        _finding("a", "b", p=1.5)
