"""The trained knowledge base and its JSON model file.

Model file layout (UTF-8 JSON, keys sorted, format ``codesig-model`` v1)::

    {
      "format": "codesig-model", "version": 1,
      "pipeline": "signal" | "nlp", "case": str,
      "signal": {"ngram": int, "window": int},
      "nlp": {"order": int, "delta": "<decimal>", "vocab_size": int},
      "schemes": {
        "CVE": {
          "classes": [ids in sorted order],
          "counts": [training count per class],
          "centroids": [["<decimal>", ...] per class],          # signal only
          "grams": [[[code, count], ...] per class],            # nlp only
          "thresholds": {"eucl": "<decimal>", ...},             # signal only
          "location_types": {class-id: "sink"|"path"|"fix"|"unknown"}
        },
        "CWE": {...}
      },
      "lines": [[L, B, W, [line, ...]], ...]
    }

Every real number is written as a positional decimal string that parses
back to the identical float.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .classify import ClusterModel
from .corpus import KnowledgeBaseIndex, LocationType
from .lineloc import LineMatrix
from .nlp import GramCounts, LanguageModel
from .signal import DEFAULT_NGRAM, DEFAULT_WINDOW

FORMAT_NAME = "codesig-model"
FORMAT_VERSION = 1
PIPELINES = ("signal", "nlp")


class ModelFormatError(ValueError):
    pass


def _dec(x: float) -> str:
    return np.format_float_positional(float(x), unique=True, trim="-")


@dataclass
class KnowledgeBase:
    pipeline: str
    case_name: str = ""
    ngram: int = DEFAULT_NGRAM
    window: int = DEFAULT_WINDOW
    clusters: dict[str, ClusterModel] = field(default_factory=dict)
    thresholds: dict[str, dict[str, float]] = field(default_factory=dict)
    language: dict[str, LanguageModel] = field(default_factory=dict)
    location_types: dict[str, dict[str, LocationType]] = field(default_factory=dict)
    lines: LineMatrix = field(default_factory=LineMatrix)

    def __post_init__(self):
        if self.pipeline not in PIPELINES:
            raise ValueError(f"pipeline must be one of {PIPELINES}, got {self.pipeline!r}")

    def schemes(self) -> list[str]:
        source = self.clusters if self.pipeline == "signal" else self.language
        return sorted(source)

    def location_type(self, scheme: str, class_id: str) -> LocationType:
        return self.location_types.get(scheme, {}).get(class_id, LocationType.UNKNOWN)


def majority_location_types(index: KnowledgeBaseIndex, scheme: str) -> dict[str, LocationType]:
    """Most frequent annotated location type per class; ties go to the first seen."""
    votes: dict[str, Counter] = {}
    for entry in index.entries:
        for ann in entry.annotations:
            cid = ann.class_id(scheme)
            if cid and ann.location_type is not LocationType.UNKNOWN:
                votes.setdefault(cid, Counter())[ann.location_type] += 1
    return {cid: c.most_common(1)[0][0] for cid, c in votes.items()}


def dumps(kb: KnowledgeBase) -> str:
    schemes: dict[str, Any] = {}
    for scheme in kb.schemes():
        block: dict[str, Any] = {
            "location_types": {c: t.value for c, t in sorted(kb.location_types.get(scheme, {}).items())}
        }
        if kb.pipeline == "signal":
            cm = kb.clusters[scheme]
            ids = cm.class_ids()
            block["classes"] = ids
            block["counts"] = [cm.centroids[c][1] for c in ids]
            block["centroids"] = [[_dec(v) for v in cm.centroids[c][0]] for c in ids]
            block["thresholds"] = {m: _dec(v) for m, v in sorted(kb.thresholds.get(scheme, {}).items())}
        else:
            lm = kb.language[scheme]
            ids = lm.class_ids()
            block["classes"] = ids
            block["counts"] = [lm.tables[c].total for c in ids]
            block["grams"] = [
                [[int(g), int(n)] for g, n in zip(lm.tables[c].grams, lm.tables[c].counts)] for c in ids
            ]
        schemes[scheme] = block

    doc: dict[str, Any] = {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "pipeline": kb.pipeline,
        "case": kb.case_name,
        "schemes": schemes,
        "lines": [[*key, list(kb.lines.cells[key])] for key in sorted(kb.lines.cells)],
    }
    if kb.pipeline == "signal":
        doc["signal"] = {"ngram": kb.ngram, "window": kb.window}
    else:
        any_lm = next(iter(kb.language.values()), None)
        if any_lm is not None:
            doc["nlp"] = {"order": any_lm.order, "delta": _dec(any_lm.delta), "vocab_size": any_lm.vocab_size}
    return json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n"


def loads(text: str) -> KnowledgeBase:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"model file is not valid JSON: {exc}") from None
    if not isinstance(doc, dict) or doc.get("format") != FORMAT_NAME:
        raise ModelFormatError("not a codesig model file")
    if doc.get("version") != FORMAT_VERSION:
        raise ModelFormatError(f"unsupported model version {doc.get('version')!r}")

    try:
        kb = KnowledgeBase(pipeline=doc["pipeline"], case_name=doc.get("case", ""))
        if kb.pipeline == "signal":
            kb.ngram = int(doc["signal"]["ngram"])
            kb.window = int(doc["signal"]["window"])
        for scheme, block in doc["schemes"].items():
            ids = block["classes"]
            kb.location_types[scheme] = {c: LocationType(t) for c, t in block["location_types"].items()}
            if kb.pipeline == "signal":
                cents = {
                    c: (np.array([float(v) for v in vals]), int(n))
                    for c, vals, n in zip(ids, block["centroids"], block["counts"])
                }
                kb.clusters[scheme] = ClusterModel(scheme, cents)
                kb.thresholds[scheme] = {m: float(v) for m, v in block["thresholds"].items()}
            else:
                meta = doc["nlp"]
                lm = LanguageModel(scheme, int(meta["order"]), float(meta["delta"]), int(meta["vocab_size"]))
                for c, pairs in zip(ids, block["grams"]):
                    arr = np.array(pairs, dtype=np.int64).reshape(-1, 2)
                    lm.tables[c] = GramCounts(arr[:, 0].copy(), arr[:, 1].copy())
                kb.language[scheme] = lm
        for lines_, bytes_, words_, found in doc["lines"]:
            for line in found:
                kb.lines.add((int(lines_), int(bytes_), int(words_)), int(line))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ModelFormatError):
            raise
        raise ModelFormatError(f"corrupt model file: {exc!r}") from None
    return kb
