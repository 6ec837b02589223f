"""Corpus parsing oracles: line splitting, byte offsets, annotation rules."""

import json

import pytest

from fqninfer.corpus import (
    AnnotatedUnit,
    FqnAnnotation,
    SourceUnit,
    annotate_by_imports,
    load_corpus,
    make_eval_variant,
    parse_annotated,
    serialize_unit,
    split_lines,
)
from fqninfer.errors import (
    MalformedRecord,
    OverlapError,
    SpanOutOfBounds,
)


# ------------------------------------------------------------- line splitting


def test_split_lines_simple():
    lines = split_lines("a;b;")
    assert [(l.text, l.char_span) for l in lines] == [("a", (0, 1)), ("b", (2, 3))]


def test_split_lines_trims_and_spans_point_into_raw_text():
    raw = "  int x = 1;  \n  y = f(x);"
    lines = split_lines(raw)
    assert [l.text for l in lines] == ["int x = 1", "y = f(x)"]
    for line in lines:
        s, e = line.char_span
        assert raw[s:e] == line.text


def test_split_lines_keeps_for_header_whole():
    raw = "for (int i = 0; i < 3; i++) sum += i;\nprint(sum);"
    lines = split_lines(raw)
    assert [l.text for l in lines] == [
        "for (int i = 0; i < 3; i++) sum += i",
        "print(sum)",
    ]


def test_split_lines_ignores_semicolons_in_literals_and_comments():
    raw = 'log("a;b");\n// c;\nd();'
    lines = split_lines(raw)
    assert [l.text for l in lines] == ['log("a;b")', "// c;\nd()"]


def test_split_lines_trailing_fragment_without_semicolon():
    assert [l.text for l in split_lines("a; b")] == ["a", "b"]


def test_split_lines_indexes_are_consecutive():
    lines = split_lines("a;\nb;\nc;")
    assert [l.index for l in lines] == [0, 1, 2]


# ---------------------------------------------------------- record parsing


def _record(**overrides):
    base = {
        "id": "u1",
        "library": "lib",
        "text": "List items;",
        "annotations": [
            {"start": 0, "end": 4, "fqn": "java.util.List", "kind": "type"}
        ],
    }
    base.update(overrides)
    return base


def test_parse_annotated_basic():
    annotated = parse_annotated(_record())
    assert annotated.unit.id == "u1"
    assert len(annotated.annotations) == 1
    ann = annotated.annotations[0]
    assert (ann.line_index, ann.char_span, ann.surface) == (0, (0, 4), "List")
    assert ann.fqn == "java.util.List"


def test_parse_annotated_byte_offsets_with_multibyte_text():
    # "é" is two UTF-8 bytes, so the annotation's byte offsets differ from
    # character offsets by one.
    text = "// café\nList items;"
    record = _record(
        text=text,
        annotations=[{"start": 9, "end": 13, "fqn": "java.util.List", "kind": "type"}],
    )
    annotated = parse_annotated(record)
    ann = annotated.annotations[0]
    assert ann.surface == "List"
    assert ann.char_span == (8, 12)


def test_parse_annotated_rejects_offsets_splitting_utf8():
    text = "café List;"
    record = _record(
        text=text,
        annotations=[{"start": 4, "end": 9, "fqn": "x.List", "kind": "type"}],
    )
    with pytest.raises(SpanOutOfBounds, match="splits"):
        parse_annotated(record)


def test_parse_annotated_rejects_overlap():
    record = _record(
        text="List items;",
        annotations=[
            {"start": 0, "end": 4, "fqn": "java.util.List", "kind": "type"},
            {"start": 2, "end": 6, "fqn": "x.y", "kind": "receiver"},
        ],
    )
    with pytest.raises(OverlapError):
        parse_annotated(record)


def test_parse_annotated_rejects_out_of_bounds_and_empty_spans():
    with pytest.raises(SpanOutOfBounds):
        parse_annotated(
            _record(annotations=[{"start": 0, "end": 99, "fqn": "a.b", "kind": "type"}])
        )
    with pytest.raises(SpanOutOfBounds):
        parse_annotated(
            _record(annotations=[{"start": 3, "end": 3, "fqn": "a.b", "kind": "type"}])
        )


def test_parse_annotated_rejects_span_crossing_lines():
    record = _record(
        text="ab;cd;",
        annotations=[{"start": 1, "end": 4, "fqn": "a.b", "kind": "receiver"}],
    )
    with pytest.raises(SpanOutOfBounds):
        parse_annotated(record)


def test_parse_annotated_rejects_missing_fields_and_bad_kinds():
    with pytest.raises(MalformedRecord):
        parse_annotated({"id": "u", "text": "x;"})
    with pytest.raises(MalformedRecord):
        parse_annotated(
            _record(annotations=[{"start": 0, "end": 4, "fqn": "a.List"}])
        )
    with pytest.raises(MalformedRecord):
        parse_annotated(
            _record(annotations=[{"start": 0, "end": 4, "fqn": "a.List", "kind": "odd"}])
        )


def test_type_annotation_surface_must_end_the_fqn():
    record = _record(
        annotations=[{"start": 0, "end": 4, "fqn": "java.util.Map", "kind": "type"}]
    )
    with pytest.raises(MalformedRecord, match="last"):
        parse_annotated(record)


def test_fqn_needs_two_segments():
    with pytest.raises(MalformedRecord):
        FqnAnnotation(
            line_index=0, char_span=(0, 4), surface="List", fqn="List", kind="type"
        )


def test_serialize_round_trips_fixture_corpus(fixtures_dir, corpus_units):
    raw_lines = (fixtures_dir / "corpus.jsonl").read_text(encoding="utf-8").splitlines()
    originals = [json.loads(line) for line in raw_lines if line]
    assert len(originals) == len(corpus_units)
    for original, annotated in zip(originals, corpus_units):
        assert serialize_unit(annotated) == original


def test_load_corpus_rejects_duplicate_ids(tmp_path):
    line = json.dumps(_record())
    path = tmp_path / "dup.jsonl"
    path.write_text(line + "\n" + line + "\n", encoding="utf-8")
    with pytest.raises(MalformedRecord, match="duplicate"):
        load_corpus(path)


def test_fixture_corpus_shape(corpus_units):
    assert len(corpus_units) == 6
    assert sum(len(u.annotations) for u in corpus_units) == 25
    for unit in corpus_units:
        for ann in unit.annotations:
            line = unit.lines[ann.line_index]
            s, e = ann.char_span
            assert line.text[s:e] == ann.surface


# --------------------------------------------------------- import annotation


IMPORT_SNIPPET = """\
import java.util.List;
import java.io.File;
List<String> names = read(dir);
names.add(p);
File f = new File(p);
q.run();
"""


def test_annotate_by_imports_resolves_imports_defaults_and_receivers():
    annotated = annotate_by_imports(IMPORT_SNIPPET, unit_id="snip")
    got = [(a.line_index, a.surface, a.fqn, a.kind) for a in annotated.annotations]
    assert got == [
        (2, "List", "java.util.List", "type"),
        (2, "String", "java.lang.String", "type"),
        (3, "names", "java.util.List", "receiver"),
        (4, "File", "java.io.File", "type"),
        (4, "File", "java.io.File", "type"),
    ]


def test_annotate_by_imports_skips_undeclared_receivers_silently():
    annotated = annotate_by_imports(IMPORT_SNIPPET, unit_id="snip")
    heads = [a.surface for a in annotated.annotations if a.kind == "receiver"]
    assert "q" not in heads


def test_annotate_by_imports_uses_package_for_same_file_types():
    text = "package com.ex;\nclass Widget {}\nWidget w = new Widget();"
    annotated = annotate_by_imports(text, unit_id="pkg")
    fqns = [a.fqn for a in annotated.annotations]
    assert fqns == ["com.ex.Widget", "com.ex.Widget"]


def test_annotate_by_imports_collects_unresolved():
    text = "Mystery m = make();"
    annotated = annotate_by_imports(text, unit_id="u")
    assert annotated.annotations == ()
    assert "Mystery" in annotated.provenance["unresolved"]


def test_annotate_by_imports_ignores_wildcard_and_static_imports():
    text = (
        "import java.util.*;\n"
        "import static java.lang.Math.max;\n"
        "List x = make();"
    )
    annotated = annotate_by_imports(text, unit_id="u")
    assert [a.fqn for a in annotated.annotations] == []
    assert "List" in annotated.provenance["unresolved"]


def test_annotate_by_imports_round_trips_through_serialization():
    annotated = annotate_by_imports(IMPORT_SNIPPET, unit_id="snip", library="demo")
    record = serialize_unit(annotated)
    reparsed = parse_annotated(record)
    assert [
        (a.line_index, a.char_span, a.surface, a.fqn, a.kind)
        for a in reparsed.annotations
    ] == [
        (a.line_index, a.char_span, a.surface, a.fqn, a.kind)
        for a in annotated.annotations
    ]


# ------------------------------------------------------------- eval variants


VARIANT_TEXT = (
    "import java.util.List;\n"
    "List items = make();\n"
    "String name = pick(items);\n"
    "items.add(name);\n"
)


def _variant_unit() -> AnnotatedUnit:
    return annotate_by_imports(VARIANT_TEXT, unit_id="var")


def test_make_eval_variant_is_deterministic():
    base = _variant_unit()
    a = make_eval_variant(base, rng_seed=7)
    b = make_eval_variant(base, rng_seed=7)
    assert a.unit.raw_text == b.unit.raw_text
    assert a.provenance["removed_lines"] == b.provenance["removed_lines"]


def test_make_eval_variant_removal_keeps_surfaces_anchored():
    base = _variant_unit()
    found_removal = False
    for seed in range(30):
        variant = make_eval_variant(base, rng_seed=seed)
        removed = variant.provenance["removed_lines"]
        if not removed:
            assert variant.unit.raw_text == base.unit.raw_text
            continue
        found_removal = True
        for info in removed:
            assert info["text"] not in variant.unit.raw_text
        for ann in variant.annotations:
            line = variant.lines[ann.line_index]
            s, e = ann.char_span
            assert line.text[s:e] == ann.surface
        assert variant.provenance["parent_id"] == "var"
    assert found_removal, "no seed in 0..29 removed a line"


def test_make_eval_variant_without_declarations_is_identity():
    unit = annotate_by_imports("run(x);\nstop(y);", unit_id="nodecl")
    variant = make_eval_variant(unit, rng_seed=3)
    assert variant.unit.raw_text == unit.unit.raw_text
    assert variant.provenance["removed_lines"] == []


def test_source_unit_requires_id_and_text():
    with pytest.raises(MalformedRecord):
        SourceUnit(id="", raw_text="x;")
    with pytest.raises(MalformedRecord):
        SourceUnit(id="u", raw_text="")
