"""Synthetic weak/clean source corpora with class-distinct byte statistics."""

from __future__ import annotations

import random
from pathlib import Path

from codesig.corpus import FileEntry, KnowledgeBaseIndex, LocationType, WeaknessAnnotation, file_dimensions


def class_text(k: int, rng: random.Random, size: int = 4096) -> bytes:
    """Bytes for class ``k``: its own 6-letter alphabet and its own line length."""
    alphabet = bytes(range(0x41 + 6 * k, 0x41 + 6 * k + 6))
    line_len = 20 + 7 * k
    out = bytearray()
    while len(out) < size:
        out += bytes(rng.choice(alphabet) for _ in range(line_len - 1)) + b"\n"
    return bytes(out[:size])


def clean_text(rng: random.Random, size: int = 4096) -> bytes:
    """Bytes unlike every class: punctuation and digits, long lines."""
    alphabet = bytes(range(0x21, 0x40))
    out = bytearray()
    while len(out) < size:
        out += bytes(rng.choice(alphabet) for _ in range(63)) + b"\n"
    return bytes(out[:size])


def cve(k: int) -> str:
    return f"CVE-2010-{1000 + k}"


def cwe(k: int) -> str:
    return f"CWE-{100 + k % 3}"


def make_corpus(
    root: Path,
    classes: int = 10,
    per_class: int = 20,
    clean: int = 0,
    size: int = 4096,
    seed: int = 0,
    case: str = "synthetic",
) -> KnowledgeBaseIndex:
    """Write weak files (annotated) and optional clean files (unannotated) under ``root``."""
    rng = random.Random(seed)
    entries = []
    for k in range(classes):
        for i in range(per_class):
            rel = f"weak/c{k:02d}/f{i:03d}.c"
            data = class_text(k, rng, size)
            dims = file_dimensions(data)
            ann = WeaknessAnnotation(
                cve_id=cve(k),
                cwe_id=cwe(k),
                line=1 + rng.randrange(dims.lines),
                location_type=(LocationType.SINK, LocationType.PATH, LocationType.FIX)[k % 3],
            )
            entries.append(FileEntry(rel, dims, (ann,)))
            (root / rel).parent.mkdir(parents=True, exist_ok=True)
            (root / rel).write_bytes(data)
    for i in range(clean):
        rel = f"clean/g{i:03d}.c"
        data = clean_text(rng, size)
        entries.append(FileEntry(rel, file_dimensions(data)))
        (root / rel).parent.mkdir(parents=True, exist_ok=True)
        (root / rel).write_bytes(data)
    return KnowledgeBaseIndex(case, tuple(entries))


def fast_class_text(k: int, rng, size: int = 10_240) -> bytes:
    """numpy variant of :func:`class_text` for large corpora."""
    import numpy as np

    line_len = 20 + 7 * k
    data = rng.integers(0x41 + 6 * k, 0x41 + 6 * k + 6, size=size, dtype=np.uint8)
    data[line_len - 1 :: line_len] = 0x0A
    return data.tobytes()
