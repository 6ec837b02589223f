"""Source units, code-line splitting, and fully-qualified-name annotations.

A source unit is partial or complete Java-like code. Units are split into
code lines on top-level semicolons (not newlines), and annotations attach a
fully-qualified name (FQN) to either a simple type name occurrence or a
receiver variable occurrence inside one line.
"""

from __future__ import annotations

import hashlib
import json
import logging
import random
import re
from dataclasses import dataclass, field

from fqninfer import scan
from fqninfer.errors import MalformedRecord, OverlapError, SpanOutOfBounds

logger = logging.getLogger(__name__)

KIND_TYPE = "type"
KIND_RECEIVER = "receiver"

_IMPORT_RE = re.compile(r"(?:^|;)\s*import\s+(static\s+)?([A-Za-z_][\w.]*?)(\.\*)?\s*(?=;)")
_PACKAGE_RE = re.compile(r"(?:^|;)\s*package\s+([A-Za-z_][\w.]*)\s*(?=;)")
_TYPE_DECL_RE = re.compile(r"\b(?:class|interface|enum|record)\s+([A-Z]\w*)")
_CAP_IDENT_RE = re.compile(r"\b[A-Z]\w*\b")
_CHAIN_RE = re.compile(r"\b[A-Za-z_]\w*(?:\s*\.\s*[A-Za-z_]\w*)+")

#: Simple names resolvable without an import, as from an implicit core package.
DEFAULT_PACKAGE_TABLE = {
    name: f"java.lang.{name}"
    for name in (
        "Object", "String", "CharSequence", "StringBuilder", "StringBuffer",
        "Integer", "Long", "Short", "Byte", "Double", "Float", "Boolean",
        "Character", "Number", "Math", "System", "Thread", "Runnable",
        "Iterable", "Comparable", "Cloneable", "AutoCloseable", "Class",
        "ClassLoader", "Enum", "Void", "Process", "ProcessBuilder",
        "Throwable", "Exception", "RuntimeException", "Error",
        "IllegalArgumentException", "IllegalStateException",
        "NullPointerException", "IndexOutOfBoundsException",
        "ArrayIndexOutOfBoundsException", "StringIndexOutOfBoundsException",
        "UnsupportedOperationException", "ArithmeticException",
        "ClassCastException", "NumberFormatException", "InterruptedException",
        "ClassNotFoundException", "Override", "Deprecated",
        "SuppressWarnings", "FunctionalInterface", "SafeVarargs",
    )
}


@dataclass(frozen=True)
class SourceUnit:
    """One snippet or file of (possibly partial) code."""

    id: str
    raw_text: str
    library: str = ""

    def __post_init__(self) -> None:
        if not self.id:
            raise MalformedRecord("unit id must be non-empty")
        if not self.raw_text:
            raise MalformedRecord(f"unit {self.id!r}: raw_text must be non-empty")


@dataclass(frozen=True)
class CodeLine:
    """A semicolon-delimited code line.

    ``char_span`` is the (start, end) character span of the trimmed line text
    within the unit's ``raw_text``; end is exclusive.
    """

    index: int
    text: str
    char_span: tuple[int, int]


@dataclass(frozen=True)
class FqnAnnotation:
    """Attaches an FQN to one occurrence of a name inside a code line.

    For ``KIND_TYPE`` the surface is a simple type name and must equal the
    FQN's last dot-segment. For ``KIND_RECEIVER`` the surface is a variable
    name that the FQN replaces wholesale. ``char_span`` is relative to the
    line's trimmed text.
    """

    line_index: int
    char_span: tuple[int, int]
    surface: str
    fqn: str
    kind: str

    def __post_init__(self) -> None:
        if self.kind not in (KIND_TYPE, KIND_RECEIVER):
            raise MalformedRecord(f"unknown annotation kind {self.kind!r}")
        if "." not in self.fqn:
            raise MalformedRecord(
                f"fqn {self.fqn!r} must have at least two dot-separated segments"
            )
        if not self.surface:
            raise MalformedRecord("annotation surface must be non-empty")
        if self.kind == KIND_TYPE and self.fqn.rsplit(".", 1)[-1] != self.surface:
            raise MalformedRecord(
                f"type annotation surface {self.surface!r} is not the last "
                f"segment of {self.fqn!r}"
            )


@dataclass
class AnnotatedUnit:
    """A source unit with its code lines and FQN annotations.

    Annotations are ordered by (line_index, span start) and never overlap.
    ``provenance`` carries optional bookkeeping such as unresolved names from
    the annotator or lines removed by :func:`make_eval_variant`.
    """

    unit: SourceUnit
    lines: tuple[CodeLine, ...]
    annotations: tuple[FqnAnnotation, ...]
    provenance: dict = field(default_factory=dict)

    def annotations_on(self, line_index: int) -> tuple[FqnAnnotation, ...]:
        return tuple(a for a in self.annotations if a.line_index == line_index)


def split_lines(raw_text: str) -> tuple[CodeLine, ...]:
    """Split raw code into lines on top-level semicolons.

    A semicolon splits only when it is outside string/char literals and
    comments and at parenthesis nesting depth zero, so a for-loop header
    stays on one line. Line text is whitespace-trimmed and empty fragments
    are dropped. ``char_span`` records where the trimmed text sits in
    ``raw_text``, which lets callers restore separators exactly.
    """
    states = scan.classify_chars(raw_text)
    cuts = scan.top_level_semicolons(raw_text, states)
    lines: list[CodeLine] = []
    start = 0
    for cut in [*cuts, len(raw_text)]:
        fragment = raw_text[start:cut]
        stripped = fragment.strip()
        if stripped:
            lead = len(fragment) - len(fragment.lstrip())
            s = start + lead
            lines.append(
                CodeLine(index=len(lines), text=stripped, char_span=(s, s + len(stripped)))
            )
        start = cut + 1
    return tuple(lines)


def _byte_to_char(raw_text: str) -> dict[int, int]:
    """Map UTF-8 byte offsets to character offsets (boundaries only)."""
    mapping = {}
    b = 0
    for i, ch in enumerate(raw_text):
        mapping[b] = i
        b += len(ch.encode("utf-8"))
    mapping[b] = len(raw_text)
    return mapping


def _char_to_byte(raw_text: str) -> list[int]:
    offsets = [0]
    b = 0
    for ch in raw_text:
        b += len(ch.encode("utf-8"))
        offsets.append(b)
    return offsets


def _anchor_span(
    unit_id: str, lines: tuple[CodeLine, ...], span: tuple[int, int]
) -> tuple[int, tuple[int, int]]:
    """Re-anchor a unit-global character span to (line_index, in-line span)."""
    for line in lines:
        ls, le = line.char_span
        if ls <= span[0] and span[1] <= le:
            return line.index, (span[0] - ls, span[1] - ls)
    raise SpanOutOfBounds(
        f"unit {unit_id!r}: span {span} does not fall inside a single code line"
    )


def parse_annotated(record: dict) -> AnnotatedUnit:
    """Build an :class:`AnnotatedUnit` from a corpus record.

    The record format is ``{"id", "library", "text", "annotations": [{"start",
    "end", "fqn", "kind"}, ...]}`` where offsets are 0-based UTF-8 byte
    offsets into ``text`` and ``end`` is exclusive. Raises
    :class:`MalformedRecord`, :class:`SpanOutOfBounds`, or
    :class:`OverlapError` on invalid input.
    """
    if not isinstance(record, dict):
        raise MalformedRecord(f"record must be an object, got {type(record).__name__}")
    try:
        unit_id = record["id"]
        text = record["text"]
        raw_annotations = record["annotations"]
    except KeyError as exc:
        raise MalformedRecord(f"record missing field {exc.args[0]!r}") from None
    library = record.get("library", "")
    if not isinstance(unit_id, str) or not isinstance(text, str):
        raise MalformedRecord("id and text must be strings")
    if not isinstance(library, str):
        raise MalformedRecord("library must be a string")
    if not isinstance(raw_annotations, list):
        raise MalformedRecord("annotations must be a list")

    unit = SourceUnit(id=unit_id, raw_text=text, library=library)
    lines = split_lines(text)
    byte_len = len(text.encode("utf-8"))
    b2c = _byte_to_char(text)

    spans_seen: list[tuple[int, int]] = []
    annotations = []
    for raw in raw_annotations:
        if not isinstance(raw, dict):
            raise MalformedRecord(f"unit {unit_id!r}: annotation must be an object")
        try:
            start, end, fqn, kind = raw["start"], raw["end"], raw["fqn"], raw["kind"]
        except KeyError as exc:
            raise MalformedRecord(
                f"unit {unit_id!r}: annotation missing field {exc.args[0]!r}"
            ) from None
        if not isinstance(start, int) or not isinstance(end, int):
            raise MalformedRecord(f"unit {unit_id!r}: annotation offsets must be ints")
        if not isinstance(fqn, str) or not isinstance(kind, str):
            raise MalformedRecord(f"unit {unit_id!r}: fqn and kind must be strings")
        if start < 0 or end > byte_len or start >= end:
            raise SpanOutOfBounds(
                f"unit {unit_id!r}: annotation byte span ({start}, {end}) outside "
                f"[0, {byte_len}] or empty"
            )
        if start not in b2c or end not in b2c:
            raise SpanOutOfBounds(
                f"unit {unit_id!r}: byte span ({start}, {end}) splits a UTF-8 sequence"
            )
        for s, e in spans_seen:
            if start < e and s < end:
                raise OverlapError(
                    f"unit {unit_id!r}: annotation spans ({s}, {e}) and "
                    f"({start}, {end}) overlap"
                )
        spans_seen.append((start, end))
        char_span = (b2c[start], b2c[end])
        line_index, line_span = _anchor_span(unit_id, lines, char_span)
        surface = text[char_span[0] : char_span[1]]
        annotations.append(
            FqnAnnotation(
                line_index=line_index,
                char_span=line_span,
                surface=surface,
                fqn=fqn,
                kind=kind,
            )
        )
    annotations.sort(key=lambda a: (a.line_index, a.char_span[0]))
    return AnnotatedUnit(unit=unit, lines=lines, annotations=tuple(annotations))


def serialize_unit(annotated: AnnotatedUnit) -> dict:
    """Inverse of :func:`parse_annotated`; emits byte offsets again."""
    text = annotated.unit.raw_text
    c2b = _char_to_byte(text)
    records = []
    for ann in annotated.annotations:
        line = annotated.lines[ann.line_index]
        start = line.char_span[0] + ann.char_span[0]
        end = line.char_span[0] + ann.char_span[1]
        records.append(
            {"start": c2b[start], "end": c2b[end], "fqn": ann.fqn, "kind": ann.kind}
        )
    records.sort(key=lambda r: r["start"])
    return {
        "id": annotated.unit.id,
        "library": annotated.unit.library,
        "text": text,
        "annotations": records,
    }


def load_corpus(path) -> list[AnnotatedUnit]:
    """Read a JSON-lines corpus file; unit ids must be unique."""
    units = []
    ids = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedRecord(f"{path}:{lineno}: invalid JSON: {exc}") from None
            annotated = parse_annotated(record)
            if annotated.unit.id in ids:
                raise MalformedRecord(
                    f"{path}:{lineno}: duplicate unit id {annotated.unit.id!r}"
                )
            ids.add(annotated.unit.id)
            units.append(annotated)
    return units


def save_corpus(units, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for annotated in units:
            fh.write(json.dumps(serialize_unit(annotated), sort_keys=True))
            fh.write("\n")


def _skip_regions(scrubbed: str) -> list[tuple[int, int]]:
    """Spans of import and package statements, where names are never usages."""
    regions = []
    for pat in (_IMPORT_RE, _PACKAGE_RE):
        for m in pat.finditer(scrubbed):
            regions.append(m.span())
    return regions


def _in_regions(pos: int, regions: list[tuple[int, int]]) -> bool:
    return any(s <= pos < e for s, e in regions)


def _declaration_sites(scrubbed: str) -> dict[str, tuple[int, str | None]]:
    """Map variable name -> (first declaration offset, declared type or None).

    Collects typed declarations (locals, parameters, catch clauses, for
    headers) and lambda parameters. The type is the simple capitalized name
    when present, else None (primitives, ``var``, untyped lambda params).
    """
    sites: dict[str, tuple[int, str | None]] = {}

    def add(name: str, pos: int, type_name: str | None) -> None:
        if name not in sites or pos < sites[name][0]:
            sites[name] = (pos, type_name)

    typed = re.compile(
        r"(?<![\w.])(?:final\s+)?"
        r"(?P<type>[A-Z]\w*(?:\s*<[^<>]*(?:<[^<>]*>[^<>]*)*>)?(?:\s*\[\s*\])*"
        r"|int|long|short|byte|char|boolean|float|double|var)"
        r"\s+(?P<name>[a-z_]\w*)\s*(?=[=;,):\[]|$)",
        re.MULTILINE,
    )
    for m in typed.finditer(scrubbed):
        type_name = m.group("type")
        simple = re.match(r"[A-Z]\w*", type_name)
        add(m.group("name"), m.start("name"), simple.group(0) if simple else None)

    for m in re.finditer(r"\(([^()]*)\)\s*->", scrubbed):
        for part in m.group(1).split(","):
            ident = re.fullmatch(r"\s*([a-z_]\w*)\s*", part)
            if ident:
                add(ident.group(1), m.start(1) + part.index(ident.group(1)), None)
    for m in re.finditer(r"(?<![\w.)\]])([a-z_]\w*)\s*->", scrubbed):
        add(m.group(1), m.start(1), None)

    return sites


def annotate_by_imports(
    raw_text: str,
    *,
    unit_id: str = "unit",
    library: str = "",
    default_packages: dict[str, str] | None = None,
) -> AnnotatedUnit:
    """Annotate compilable-looking code using its own import table.

    Capitalized simple type names are resolved through explicit imports,
    same-file type declarations (qualified by the file's package), and a
    default-package table (``DEFAULT_PACKAGE_TABLE`` unless overridden).
    Receiver variables resolve to their declared type's FQN. Names that
    cannot be resolved are skipped and listed in
    ``provenance["unresolved"]``.
    """
    if default_packages is None:
        default_packages = DEFAULT_PACKAGE_TABLE
    unit = SourceUnit(id=unit_id, raw_text=raw_text, library=library)
    lines = split_lines(raw_text)
    states = scan.classify_chars(raw_text)
    scrubbed = scan.scrub(raw_text, states)

    table = dict(default_packages)
    package = None
    pkg_match = _PACKAGE_RE.search(scrubbed)
    if pkg_match:
        package = pkg_match.group(1)
    unresolved: set[str] = set()
    for m in _TYPE_DECL_RE.finditer(scrubbed):
        name = m.group(1)
        if package:
            table[name] = f"{package}.{name}"
        else:
            unresolved.add(name)
    for m in _IMPORT_RE.finditer(scrubbed):
        static, fqn, wildcard = m.group(1), m.group(2), m.group(3)
        if static or wildcard:
            continue  # wildcard and static imports cannot resolve a simple type
        if "." in fqn:
            table[fqn.rsplit(".", 1)[-1]] = fqn

    skip = _skip_regions(scrubbed)
    decls = _declaration_sites(scrubbed)

    global_spans: list[tuple[int, int, str, str]] = []
    for m in _CAP_IDENT_RE.finditer(scrubbed):
        start, end = m.span()
        if _in_regions(start, skip):
            continue
        before = scrubbed[:start].rstrip()
        if before.endswith("."):
            continue  # already qualified
        if re.search(r"\b(?:class|interface|enum|record)\s*$", before):
            continue  # declaration site, not a usage
        name = m.group(0)
        fqn = table.get(name)
        if fqn is None:
            unresolved.add(name)
            continue
        global_spans.append((start, end, fqn, KIND_TYPE))

    for m in _CHAIN_RE.finditer(scrubbed):
        if _in_regions(m.start(), skip):
            continue
        before = scrubbed[: m.start()].rstrip()
        if before.endswith((".", ")", "]")):
            continue  # chained access, only the head of a chain is a receiver
        segments = re.findall(r"[A-Za-z_]\w*", m.group(0))
        head = segments[0]
        if not head[0].islower() or any(s[0].isupper() for s in segments[1:]):
            continue  # qualified name, not a receiver use
        decl = decls.get(head)
        if decl is None:
            continue  # undeclared: a genuine inference point, not annotatable
        decl_pos, type_name = decl
        if decl_pos >= m.start():
            continue
        fqn = table.get(type_name) if type_name else None
        if fqn is None:
            unresolved.add(head)
            continue
        global_spans.append((m.start(), m.start() + len(head), fqn, KIND_RECEIVER))

    annotations = []
    for start, end, fqn, kind in sorted(global_spans):
        line_index, span = _anchor_span(unit_id, lines, (start, end))
        annotations.append(
            FqnAnnotation(
                line_index=line_index,
                char_span=span,
                surface=raw_text[start:end],
                fqn=fqn,
                kind=kind,
            )
        )
    provenance = {"unresolved": sorted(unresolved)}
    return AnnotatedUnit(
        unit=unit, lines=lines, annotations=tuple(annotations), provenance=provenance
    )


def _stable_seed(*parts) -> int:
    digest = hashlib.sha256(":".join(str(p) for p in parts).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


_STATEMENT_KEYWORDS = ("for", "while", "if", "else", "switch", "catch", "try", "return")


def _declaration_line_indexes(annotated: AnnotatedUnit) -> list[int]:
    indexes = []
    for line in annotated.lines:
        first_word = re.match(r"[A-Za-z_]\w*", line.text)
        if first_word and first_word.group(0) in _STATEMENT_KEYWORDS:
            continue
        if line.text.endswith(("{", "}")):
            continue
        scrview = scan.scrub(line.text)
        if _declaration_sites(scrview):
            indexes.append(line.index)
    return indexes


def make_eval_variant(annotated: AnnotatedUnit, rng_seed: int) -> AnnotatedUnit:
    """Deterministically remove 0-2 variable-declaration lines from a unit.

    Later uses of the removed variables become undeclared receivers, which is
    what evaluation on partial code needs. Annotations on removed lines are
    dropped, the rest are re-anchored. Removed lines are recorded in
    ``provenance["removed_lines"]``. A unit with no declaration lines comes
    back unchanged (removal count 0).
    """
    candidates = _declaration_line_indexes(annotated)
    rng = random.Random(_stable_seed(rng_seed, annotated.unit.id))
    k = rng.randint(0, min(2, len(candidates)))
    removed = sorted(rng.sample(candidates, k)) if k else []
    provenance = dict(annotated.provenance)
    provenance["removed_lines"] = [
        {"index": i, "text": annotated.lines[i].text} for i in removed
    ]
    provenance["parent_id"] = annotated.unit.id
    if not removed:
        return AnnotatedUnit(
            unit=annotated.unit,
            lines=annotated.lines,
            annotations=annotated.annotations,
            provenance=provenance,
        )

    text = annotated.unit.raw_text
    cut_spans = []
    for i in removed:
        s, e = annotated.lines[i].char_span
        tail = text[e:]
        semi = tail.find(";")
        if semi >= 0 and not tail[:semi].strip():
            e += semi + 1
        cut_spans.append((s, e))

    pieces = []
    shift_at: list[tuple[int, int]] = []  # (original offset, cumulative shift)
    pos = 0
    shift = 0
    for s, e in cut_spans:
        pieces.append(text[pos:s])
        shift += e - s
        shift_at.append((e, shift))
        pos = e
    pieces.append(text[pos:])
    new_text = "".join(pieces)

    def remap(offset: int) -> int:
        total = 0
        for at, sh in shift_at:
            if offset >= at:
                total = sh
        return offset - total

    new_unit = SourceUnit(id=annotated.unit.id, raw_text=new_text, library=annotated.unit.library)
    new_lines = split_lines(new_text)
    new_annotations = []
    removed_set = set(removed)
    for ann in annotated.annotations:
        if ann.line_index in removed_set:
            continue
        line = annotated.lines[ann.line_index]
        g_start = line.char_span[0] + ann.char_span[0]
        g_end = line.char_span[0] + ann.char_span[1]
        line_index, span = _anchor_span(new_unit.id, new_lines, (remap(g_start), remap(g_end)))
        new_annotations.append(
            FqnAnnotation(
                line_index=line_index,
                char_span=span,
                surface=ann.surface,
                fqn=ann.fqn,
                kind=ann.kind,
            )
        )
    return AnnotatedUnit(
        unit=new_unit,
        lines=new_lines,
        annotations=tuple(new_annotations),
        provenance=provenance,
    )
