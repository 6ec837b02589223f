"""Find the places in partial code where an FQN must be inferred.

Three kinds of inference points are detected lexically, without a parser:
declaration types (``Type ident``, including generic arguments componentwise),
instantiations (``new Type(...)``), and receivers (an undeclared lowercase
variable a member is accessed on). Already-qualified names, chained calls
past the first receiver, plain variable uses, and locally declared variables
are excluded.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from fqninfer import scan
from fqninfer.corpus import AnnotatedUnit, SourceUnit, split_lines

DECL_TYPE = "decl_type"
NEW_TYPE = "new_type"
RECEIVER = "receiver"

#: Words that can never be a receiver variable or a type name.
JAVA_KEYWORDS = frozenset(
    """abstract assert boolean break byte case catch char class const continue
    default do double else enum extends final finally float for goto if
    implements import instanceof int interface long native new package private
    protected public record return short static strictfp super switch
    synchronized this throw throws transient try var void volatile while
    true false null""".split()
)

_CAP_NAME_RE = re.compile(r"\b[A-Z]\w*")
_NEW_RE = re.compile(r"\bnew\s+([A-Z]\w*)\s*(?=[(\[<])")
_CHAIN_RE = re.compile(r"\b[A-Za-z_]\w*(?:\s*\.\s*[A-Za-z_]\w*)+")
_DECL_IDENT_RE = re.compile(r"\s+([a-z_]\w*)\s*(?=[=;,):\[]|$)")


@dataclass(frozen=True)
class InferencePoint:
    """One place where an FQN is missing.

    ``char_span`` is relative to the line's text and covers exactly the
    simple name (``decl_type``/``new_type``) or the receiver variable; ``@``,
    generics, and brackets are never part of the span.
    """

    kind: str
    line_index: int
    char_span: tuple[int, int]
    simple_name: str
    declared_locally: bool = False


def _generic_args_end(text: str, start: int) -> int:
    """Given ``text[start] == '<'``, return the offset past the matching '>'.

    Returns ``start`` when the brackets never balance (a comparison, not a
    generic argument list).
    """
    depth = 0
    for i in range(start, len(text)):
        ch = text[i]
        if ch == "<":
            depth += 1
        elif ch == ">":
            depth -= 1
            if depth == 0:
                return i + 1
        elif ch in ";{})" or (depth == 0 and i > start):
            break
    return start


def local_declarations(unit: SourceUnit | AnnotatedUnit) -> set[str]:
    """Identifiers introduced by declarations anywhere in the unit.

    Covers typed locals, parameters in visible signatures, catch clauses,
    for headers, and lambda parameters.
    """
    return set(_declaration_offsets(_unit_scrubbed(unit)))


def _unit_scrubbed(unit: SourceUnit | AnnotatedUnit) -> str:
    raw = unit.raw_text if isinstance(unit, SourceUnit) else unit.unit.raw_text
    return scan.scrub(raw)


_TYPE_START_RE = re.compile(
    r"(?<![\w.])(?:[a-z_]\w*\s*\.\s*)*"
    r"(?:[A-Z]\w*|int|long|short|byte|char|boolean|float|double|var)(?![\w.])"
)
_ARRAY_SUFFIX_RE = re.compile(r"\s*\[\s*\]")


def _declaration_offsets(scrubbed: str) -> dict[str, int]:
    """Variable name -> earliest declaration offset, found lexically."""
    sites: dict[str, int] = {}

    def add(name: str, pos: int) -> None:
        if name not in JAVA_KEYWORDS and (name not in sites or pos < sites[name]):
            sites[name] = pos

    pos = 0
    while True:
        m = _TYPE_START_RE.search(scrubbed, pos)
        if not m:
            break
        pos = m.end()
        cursor = m.end()
        probe = cursor
        while probe < len(scrubbed) and scrubbed[probe].isspace():
            probe += 1
        if probe < len(scrubbed) and scrubbed[probe] == "<":
            end = _generic_args_end(scrubbed, probe)
            if end == probe:
                continue
            cursor = end
        while True:
            brackets = _ARRAY_SUFFIX_RE.match(scrubbed, cursor)
            if not brackets:
                break
            cursor = brackets.end()
        ident = _DECL_IDENT_RE.match(scrubbed, cursor)
        if ident:
            add(ident.group(1), ident.start(1))

    for m in re.finditer(r"\(([^()]*)\)\s*->", scrubbed):
        for part in m.group(1).split(","):
            name = re.fullmatch(r"\s*([a-z_]\w*)\s*", part)
            if name:
                add(name.group(1), m.start(1))
    for m in re.finditer(r"(?<![\w.)\]])([a-z_]\w*)\s*->", scrubbed):
        add(m.group(1), m.start(1))
    return sites


def _component_type_names(scrubbed: str, start: int, end: int):
    """Capitalized, unqualified names inside a generic argument region."""
    for m in _CAP_NAME_RE.finditer(scrubbed, start, end):
        before = scrubbed[: m.start()].rstrip()
        if before.endswith("."):
            continue
        yield m


def find_points(unit: SourceUnit | AnnotatedUnit) -> list[InferencePoint]:
    """All inference points of a unit, ordered by (line, span start).

    Emits ``decl_type`` for declaration type names (generic arguments
    componentwise, and for a capitalized receiver such as a static call,
    whose FQN is equally the missing piece), ``new_type`` for instantiated
    type names, and ``receiver`` for undeclared lowercase receivers. Only the
    first receiver of a chain counts; qualified names are skipped entirely.
    """
    raw = unit.raw_text if isinstance(unit, SourceUnit) else unit.unit.raw_text
    lines = split_lines(raw) if isinstance(unit, SourceUnit) else unit.lines
    scrubbed_full = scan.scrub(raw)
    decls = _declaration_offsets(scrubbed_full)

    points: list[InferencePoint] = []
    seen: set[tuple[str, int, int]] = set()

    def emit(kind: str, line_index: int, g_start: int, g_end: int, name: str) -> None:
        line = lines[line_index]
        key = (kind, g_start, g_end)
        if key in seen:
            return
        seen.add(key)
        points.append(
            InferencePoint(
                kind=kind,
                line_index=line_index,
                char_span=(g_start - line.char_span[0], g_end - line.char_span[0]),
                simple_name=name,
            )
        )

    for line in lines:
        ls, le = line.char_span
        view = scrubbed_full[ls:le]

        for m in _NEW_RE.finditer(view):
            if scrubbed_full[: ls + m.start(1)].rstrip().endswith("."):
                continue
            emit(NEW_TYPE, line.index, ls + m.start(1), ls + m.end(1), m.group(1))
            after = ls + m.end(1)
            while after < le and scrubbed_full[after].isspace():
                after += 1
            if after < le and scrubbed_full[after] == "<":
                g_end = _generic_args_end(scrubbed_full, after)
                for gm in _component_type_names(scrubbed_full, after, g_end):
                    emit(DECL_TYPE, line.index, gm.start(), gm.end(), gm.group(0))

        for m in _CAP_NAME_RE.finditer(view):
            g_start, g_end = ls + m.start(), ls + m.end()
            before = scrubbed_full[:g_start].rstrip()
            if before.endswith("."):
                continue
            if re.search(r"\bnew\s*$", before):
                continue  # handled by the new-expression pass
            cursor = g_end
            probe = cursor
            while probe < le and scrubbed_full[probe].isspace():
                probe += 1
            generic_span = None
            if probe < le and scrubbed_full[probe] == "<":
                gend = _generic_args_end(scrubbed_full, probe)
                if gend > probe:
                    generic_span = (probe, gend)
                    cursor = gend
            while True:
                brackets = _ARRAY_SUFFIX_RE.match(scrubbed_full, cursor, le)
                if not brackets:
                    break
                cursor = brackets.end()
            ident = _DECL_IDENT_RE.match(scrubbed_full, cursor, le)
            if not ident:
                continue
            emit(DECL_TYPE, line.index, g_start, g_end, m.group(0))
            if generic_span:
                for gm in _component_type_names(scrubbed_full, *generic_span):
                    emit(DECL_TYPE, line.index, gm.start(), gm.end(), gm.group(0))

        for m in _CHAIN_RE.finditer(view):
            g_start = ls + m.start()
            before = scrubbed_full[:g_start].rstrip()
            if before.endswith((".", ")", "]")):
                continue  # chained access: only the first receiver is a point
            segments = [
                (seg.group(0), g_start + seg.start())
                for seg in re.finditer(r"[A-Za-z_]\w*", m.group(0))
            ]
            head, head_start = segments[0]
            if head in JAVA_KEYWORDS:
                continue
            if head[0].isupper():
                # A static-style receiver: the type's FQN is what is missing.
                emit(DECL_TYPE, line.index, head_start, head_start + len(head), head)
                continue
            if any(name[0].isupper() for name, _ in segments[1:]):
                continue  # qualified name such as org.example.Foo
            decl_pos = decls.get(head)
            if decl_pos is not None and decl_pos < g_start:
                continue
            emit(RECEIVER, line.index, head_start, head_start + len(head), head)

    points.sort(key=lambda p: (p.line_index, p.char_span[0]))
    return points
