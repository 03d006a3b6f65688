"""Target tree loading, file dimensions and the annotated meta-index."""

from __future__ import annotations

import enum
import logging
import os
import xml.etree.ElementTree as ET
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, NamedTuple, Optional, Sequence

log = logging.getLogger(__name__)


class IndexParseError(ValueError):
    """Raised for a meta-index document that is not well-formed XML."""

    def __init__(self, message: str, line: int = 0, column: int = 0):
        super().__init__(f"{message} (line {line}, column {column})")
        self.line = line
        self.column = column


class IndexValidationError(ValueError):
    """Raised when an index violates the data model invariants."""


class LocationType(str, enum.Enum):
    SINK = "sink"
    PATH = "path"
    FIX = "fix"
    UNKNOWN = "unknown"


@dataclass(frozen=True)
class FileDims:
    lines: int
    bytes: int
    words: int

    def __post_init__(self):
        if min(self.lines, self.bytes, self.words) < 0:
            raise IndexValidationError(f"negative file dimension: {self}")
        if self.bytes == 0 and (self.lines or self.words):
            raise IndexValidationError(f"empty file must have zero lines and words: {self}")
        if self.bytes > 0 and self.lines < 1:
            raise IndexValidationError(f"non-empty file must have at least one line: {self}")

    def key(self) -> tuple[int, int, int]:
        return (self.lines, self.bytes, self.words)


@dataclass(frozen=True)
class WeaknessAnnotation:
    cve_id: Optional[str] = None
    cwe_id: Optional[str] = None
    line: Optional[int] = None
    location_type: LocationType = LocationType.UNKNOWN
    fragment_size: Optional[int] = None

    def __post_init__(self):
        if not self.cve_id and not self.cwe_id:
            raise IndexValidationError("weakness needs a cve or a cwe identifier")
        if self.line is not None and self.line < 1:
            raise IndexValidationError(f"weakness line must be >= 1, got {self.line}")
        if self.fragment_size is not None and self.fragment_size < 0:
            raise IndexValidationError(f"negative fragment size {self.fragment_size}")
        object.__setattr__(self, "location_type", LocationType(self.location_type))

    def class_id(self, scheme: str) -> Optional[str]:
        """Return the label of this annotation under ``scheme`` ("CVE" or "CWE")."""
        return self.cwe_id if scheme == "CWE" else self.cve_id


@dataclass(frozen=True)
class FileEntry:
    path: str
    dims: FileDims
    annotations: tuple[WeaknessAnnotation, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "annotations", tuple(self.annotations))
        for ann in self.annotations:
            if ann.line is not None and ann.line > self.dims.lines:
                raise IndexValidationError(
                    f"{self.path}: weakness line {ann.line} exceeds file length {self.dims.lines}"
                )

    def classes(self, scheme: str) -> list[str]:
        """Distinct true class labels of this file, in first-seen order."""
        seen: dict[str, None] = {}
        for ann in self.annotations:
            cid = ann.class_id(scheme)
            if cid:
                seen.setdefault(cid)
        return list(seen)


@dataclass(frozen=True)
class KnowledgeBaseIndex:
    case_name: str
    entries: tuple[FileEntry, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(self.entries))
        seen = set()
        for e in self.entries:
            if e.path in seen:
                raise IndexValidationError(f"duplicate path in index: {e.path}")
            seen.add(e.path)

    def by_path(self) -> dict[str, FileEntry]:
        return {e.path: e for e in self.entries}


class ScannedFile(NamedTuple):
    path: str
    content: bytes
    dims: FileDims


def file_dimensions(content: bytes) -> FileDims:
    """Count lines, bytes and words of raw file content.

    Line endings are ``\\n``, ``\\r``, ``\\r\\n`` and end-of-file, so an
    unterminated last line still counts. Words are maximal runs of
    non-blank bytes.
    """
    size = len(content)
    if size == 0:
        return FileDims(0, 0, 0)

    lines = content.count(b"\n") + content.count(b"\r") - content.count(b"\r\n")
    if content[-1] not in (0x0A, 0x0D):
        lines += 1

    # bytes.split() splits on exactly space, tab, LF, VT, FF and CR
    words = len(content.split())
    return FileDims(lines, size, words)


def _opt_int(elem: ET.Element, name: str, where: str) -> Optional[int]:
    raw = elem.get(name)
    if raw is None:
        return None
    try:
        return int(raw)
    except ValueError:
        raise IndexValidationError(f"{where}: attribute {name}={raw!r} is not an integer") from None


def load_index(document: str | bytes) -> KnowledgeBaseIndex:
    """Parse a meta-index XML document."""
    try:
        root = ET.fromstring(document)
    except ET.ParseError as exc:
        line, col = exc.position
        raise IndexParseError(f"malformed index XML: {exc}", line, col) from None

    if root.tag != "index":
        raise IndexValidationError(f"root element must be <index>, got <{root.tag}>")

    entries = []
    for fe in root.findall("file"):
        path = fe.get("path")
        if not path:
            raise IndexValidationError("<file> element without a path attribute")
        dims_vals = [_opt_int(fe, a, path) for a in ("lines", "bytes", "words")]
        if None in dims_vals:
            raise IndexValidationError(f"{path}: lines, bytes and words are required")
        try:
            dims = FileDims(*dims_vals)
            anns = []
            for we in fe.findall("weakness"):
                anns.append(
                    WeaknessAnnotation(
                        cve_id=we.get("cve"),
                        cwe_id=we.get("cwe"),
                        line=_opt_int(we, "line", path),
                        location_type=we.get("type", "unknown"),
                        fragment_size=_opt_int(we, "fragment", path),
                    )
                )
            entries.append(FileEntry(path, dims, tuple(anns)))
        except IndexValidationError as exc:
            if str(exc).startswith(path):
                raise
            raise IndexValidationError(f"{path}: {exc}") from None
        except ValueError as exc:
            raise IndexValidationError(f"{path}: {exc}") from None
    return KnowledgeBaseIndex(root.get("case", ""), tuple(entries))


def save_index(index: KnowledgeBaseIndex) -> str:
    """Serialize an index to the meta-index XML format, deterministically."""
    root = ET.Element("index", {"case": index.case_name})
    for e in index.entries:
        fe = ET.SubElement(
            root,
            "file",
            {
                "path": e.path,
                "lines": str(e.dims.lines),
                "bytes": str(e.dims.bytes),
                "words": str(e.dims.words),
            },
        )
        for a in e.annotations:
            attrs = {}
            if a.cve_id:
                attrs["cve"] = a.cve_id
            if a.cwe_id:
                attrs["cwe"] = a.cwe_id
            if a.line is not None:
                attrs["line"] = str(a.line)
            attrs["type"] = a.location_type.value
            if a.fragment_size is not None:
                attrs["fragment"] = str(a.fragment_size)
            ET.SubElement(fe, "weakness", attrs)
    ET.indent(root)
    return '<?xml version="1.0" encoding="UTF-8"?>\n' + ET.tostring(root, encoding="unicode") + "\n"


def _matches(name: str, extensions: Sequence[str]) -> bool:
    return not extensions or any(name.endswith(ext) for ext in extensions)


def _read(path: Path) -> Optional[bytes]:
    try:
        return path.read_bytes()
    except OSError as exc:
        log.warning("skipping unreadable file %s: %s", path, exc)
        return None


def scan_target(
    root: str | os.PathLike,
    extensions: Iterable[str] = (),
    jobs: int = 1,
) -> list[ScannedFile]:
    """Read every file under ``root`` whose name ends with one of ``extensions``.

    Results are ordered by relative POSIX path. Unreadable files are logged
    and skipped; an unreadable root raises ``OSError``.
    """
    root = Path(root)
    if not root.is_dir():
        raise NotADirectoryError(f"target root is not a readable directory: {root}")
    os.listdir(root)  # surface permission errors on the root itself

    exts = tuple(extensions)
    rels = []
    for dirpath, dirnames, filenames in os.walk(root, onerror=lambda e: log.warning("%s", e)):
        dirnames.sort()
        for name in filenames:
            if _matches(name, exts):
                rels.append(Path(dirpath, name).relative_to(root).as_posix())
    rels.sort()

    paths = [root / r for r in rels]
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            contents = list(pool.map(_read, paths))
    else:
        contents = [_read(p) for p in paths]

    return [
        ScannedFile(rel, data, file_dimensions(data))
        for rel, data in zip(rels, contents)
        if data is not None
    ]
