"""Prompt generation oracles: FQN expansion, masking, windows, export."""

import gzip
import json

import pytest

from fqninfer.corpus import AnnotatedUnit, FqnAnnotation, SourceUnit, split_lines
from fqninfer.errors import MalformedRecord, NoMaskableTokens
from fqninfer.promptgen import (
    FULL_SPAN,
    RANDOM,
    MaskStrategy,
    collect_context,
    expand_line,
    export_training,
    fit_window,
    gen_prompts,
    mask_focus,
    read_training,
    restore_sequence,
)
from fqninfer.tokenizer import detokenize, tokenize


def ann(line_index, span, surface, fqn, kind):
    return FqnAnnotation(
        line_index=line_index, char_span=span, surface=surface, fqn=fqn, kind=kind
    )


def unit_from(raw_text, annotations):
    return AnnotatedUnit(
        unit=SourceUnit(id="u-test", raw_text=raw_text, library="test"),
        lines=split_lines(raw_text),
        annotations=tuple(annotations),
    )


# ---------------------------------------------------------------- expand_line


def test_expand_type_annotation_inserts_package_prefix():
    text = "List items = make()"
    a = ann(0, (0, 4), "List", "java.util.List", "type")
    expanded, regions, offset_map = expand_line(text, (a,))
    assert expanded == "java.util.List items = make()"
    assert regions == [(0, 10)]
    assert offset_map[0] == 10  # 'L' of List moved past the inserted prefix
    assert offset_map[4] == 14  # the space after List
    assert offset_map[len(text)] == len(text) + 10


def test_expand_receiver_annotation_replaces_variable():
    text = "reader.readLine()"
    a = ann(0, (0, 6), "reader", "java.io.BufferedReader", "receiver")
    expanded, regions, offset_map = expand_line(text, (a,))
    assert expanded == "java.io.BufferedReader.readLine()"
    assert regions == [(0, 22)]
    assert offset_map[0] == 0
    assert offset_map[5] == 0  # all original variable chars map to region start
    assert offset_map[6] == 22  # the dot after the receiver


def test_expand_two_annotations_is_input_order_independent():
    text = "Map m = new HashMap()"
    a1 = ann(0, (0, 3), "Map", "java.util.Map", "type")
    a2 = ann(0, (12, 19), "HashMap", "java.util.HashMap", "type")
    expanded, regions, _ = expand_line(text, (a2, a1))
    assert expanded == "java.util.Map m = new java.util.HashMap()"
    assert regions == [(0, 10), (22, 32)]


def test_expand_skip_span_leaves_that_annotation_raw():
    text = "Map m = new HashMap()"
    a1 = ann(0, (0, 3), "Map", "java.util.Map", "type")
    a2 = ann(0, (12, 19), "HashMap", "java.util.HashMap", "type")
    expanded, regions, _ = expand_line(text, (a1, a2), skip_span=(0, 3))
    assert expanded == "Map m = new java.util.HashMap()"
    assert regions == [(12, 22)]


def test_expand_rejects_surface_mismatch():
    a = ann(0, (0, 4), "List", "java.util.List", "type")
    with pytest.raises(MalformedRecord):
        expand_line("Lost items", (a,))


# ----------------------------------------------------------------- mask_focus

THREE_LINES = "x = f(y);\nList z = g();\ny = x;"
LIST_ANN = ann(1, (0, 4), "List", "java.util.List", "type")


def test_full_span_prompt_is_frozen(micro_vocab):
    unit = unit_from(THREE_LINES, [LIST_ANN])
    prompts = gen_prompts(unit, MaskStrategy(), micro_vocab, t=2)
    assert len(prompts) == 1
    p = prompts[0]
    assert p.tokens == (
        "x", "=", "f", "(", "y", ")",
        "[MASK]", "[MASK]", "[MASK]", "[MASK]", "List", "z", "=", "g", "(", ")",
        "y", "=", "x",
    )
    assert p.labels == {6: "java", 7: ".", 8: "util", 9: "."}
    assert p.focus_span == (6, 16)
    assert p.masked_fqns == (LIST_ANN,)
    assert p.unit_id == "u-test"
    assert p.line_index == 1


def test_mask_positions_equal_label_keys(micro_vocab):
    unit = unit_from(THREE_LINES, [LIST_ANN])
    p = gen_prompts(unit, MaskStrategy(), micro_vocab, t=2)[0]
    mask_positions = [i for i, t in enumerate(p.tokens) if t == "[MASK]"]
    assert mask_positions == sorted(p.labels)


def test_restored_focus_detokenizes_to_expanded_line(micro_vocab):
    unit = unit_from(THREE_LINES, [LIST_ANN])
    p = gen_prompts(unit, MaskStrategy(), micro_vocab, t=2)[0]
    restored = restore_sequence(list(p.tokens), p.labels)
    s, e = p.focus_span
    assert detokenize(restored[s:e], micro_vocab) == "java.util.List z=g()"


def test_receiver_prompt_masks_whole_fqn(micro_vocab):
    raw = "y = f(x);\nq.g();"
    a = ann(1, (0, 1), "q", "org.x", "receiver")
    p = gen_prompts(unit_from(raw, [a]), MaskStrategy(), micro_vocab, t=1)[0]
    assert p.tokens == (
        "y", "=", "f", "(", "x", ")",
        "[MASK]", "[MASK]", "[MASK]", ".", "g", "(", ")",
    )
    assert p.labels == {6: "org", 7: ".", 8: "x"}


def test_context_lines_keep_fqns_written_out(micro_vocab):
    raw = "List a = g();\nq.g();"
    anns = [
        ann(0, (0, 4), "List", "java.util.List", "type"),
        ann(1, (0, 1), "q", "org.x", "receiver"),
    ]
    prompts = gen_prompts(unit_from(raw, anns), MaskStrategy(), micro_vocab, t=1)
    second = prompts[1]
    # The prefix line carries the expanded FQN unmasked.
    assert second.tokens[:10] == ("java", ".", "util", ".", "List", "a", "=", "g", "(", ")")
    assert all(pos >= 10 for pos in second.labels)


def test_random_strategy_is_seeded_and_sized(micro_vocab):
    unit = unit_from(THREE_LINES, [LIST_ANN])
    strategy = MaskStrategy(variant=RANDOM, random_ratio=0.5)
    p1 = gen_prompts(unit, strategy, micro_vocab, t=2, rng_seed=7)[0]
    p2 = gen_prompts(unit, strategy, micro_vocab, t=2, rng_seed=7)[0]
    assert p1.tokens == p2.tokens
    assert p1.labels == p2.labels
    assert len(p1.labels) == 2  # round(0.5 * 4 maskable)
    full = gen_prompts(unit, MaskStrategy(), micro_vocab, t=2)[0]
    assert set(p1.labels).issubset(set(full.labels))
    tiny = MaskStrategy(variant=RANDOM, random_ratio=0.05)
    assert len(gen_prompts(unit, tiny, micro_vocab, t=2)[0].labels) == 1


def test_mask_strategy_validation():
    with pytest.raises(MalformedRecord):
        MaskStrategy(variant="bogus")
    with pytest.raises(MalformedRecord):
        MaskStrategy(variant=RANDOM, random_ratio=0.0)
    MaskStrategy(variant=RANDOM, random_ratio=1.0)  # inclusive upper bound
    assert MaskStrategy().variant == FULL_SPAN


def test_collect_context_bounds_and_clamping():
    unit = unit_from(THREE_LINES, [LIST_ANN])
    block = collect_context(unit, 1, t=1)
    assert [l.text for l in block.prefix_lines] == ["x = f(y)"]
    assert block.focus_line.text == "List z = g()"
    assert [l.text for l in block.suffix_lines] == ["y = x"]
    wide = collect_context(unit, 0, t=5)
    assert wide.prefix_lines == ()
    assert len(wide.suffix_lines) == 2
    with pytest.raises(MalformedRecord):
        collect_context(unit, 3, t=1)
    with pytest.raises(MalformedRecord):
        collect_context(unit, 1, t=-1)


def test_mask_focus_requires_focus_annotations():
    unit = unit_from(THREE_LINES, [LIST_ANN])
    block = collect_context(unit, 0, t=1)
    from fqninfer.tokenizer import Vocab

    vocab = Vocab(tokens=("[PAD]", "[UNK]", "[MASK]", "x"))
    with pytest.raises(NoMaskableTokens):
        mask_focus(block, MaskStrategy(), vocab)


# ----------------------------------------------------------------- fit_window


def seq(text, vocab):
    return tokenize(text, vocab)


def test_fit_window_alternates_suffix_then_prefix(micro_vocab):
    p1 = seq("x y", micro_vocab)
    p2 = seq("x y z", micro_vocab)
    s1 = seq("a b c f g", micro_vocab)
    s2 = seq("a", micro_vocab)
    prefix, suffix = fit_window([p1, p2], 4, [s1, s2], window=10)
    assert prefix == [p2]
    assert suffix == []


def test_fit_window_noop_when_it_fits(micro_vocab):
    p = [seq("x y", micro_vocab)]
    s = [seq("a b", micro_vocab)]
    assert fit_window(p, 3, s, window=100) == (p, s)


def test_fit_window_keeps_oversized_focus_whole(micro_vocab, caplog):
    with caplog.at_level("WARNING"):
        prefix, suffix = fit_window([], 50, [], window=10)
    assert (prefix, suffix) == ([], [])
    assert any("exceeds" in r.message for r in caplog.records)


def test_tight_window_drops_prefix_line(micro_vocab):
    unit = unit_from(THREE_LINES, [LIST_ANN])
    p = gen_prompts(unit, MaskStrategy(), micro_vocab, t=2, window=13)[0]
    # 19 tokens total; dropping the 3-token suffix then the 6-token prefix
    # leaves just the 10-token focus line.
    assert p.focus_span == (0, 10)
    assert p.tokens[0] == "[MASK]"
    assert sorted(p.labels) == [0, 1, 2, 3]


# ------------------------------------------------------------- gen_prompts IO


def test_gen_prompts_drops_duplicate_prompts(micro_vocab, caplog):
    raw = "List a = f();\nList a = f();"
    anns = [
        ann(0, (0, 4), "List", "java.util.List", "type"),
        ann(1, (0, 4), "List", "java.util.List", "type"),
    ]
    with caplog.at_level("WARNING"):
        prompts = gen_prompts(unit_from(raw, anns), MaskStrategy(), micro_vocab, t=0)
    assert len(prompts) == 1
    assert any("duplicate" in r.message for r in caplog.records)


def test_gen_prompts_skips_unannotated_lines(micro_vocab):
    unit = unit_from(THREE_LINES, [LIST_ANN])
    prompts = gen_prompts(unit, MaskStrategy(), micro_vocab, t=2)
    assert [p.line_index for p in prompts] == [1]


def test_fixture_corpus_prompts_obey_mask_law(corpus_units, vocab):
    total = 0
    for unit in corpus_units:
        for p in gen_prompts(unit, MaskStrategy(), vocab, t=2):
            total += 1
            s, e = p.focus_span
            for pos in p.labels:
                assert s <= pos < e
                assert p.tokens[pos] == "[MASK]"
            # Context may contain [UNK] (comments with exotic characters)
            # but ground-truth labels never do.
            assert "[UNK]" not in p.labels.values()
    assert total >= 6


def test_export_and_read_round_trip(tmp_path, corpus_units, vocab):
    prompts = [
        p
        for unit in corpus_units
        for p in gen_prompts(unit, MaskStrategy(), vocab, t=2)
    ]
    plain = tmp_path / "train.jsonl"
    assert export_training(prompts, plain) == len(prompts)
    back = read_training(plain)
    assert len(back) == len(prompts)
    for (tokens, labels), p in zip(back, prompts):
        assert tuple(tokens) == p.tokens
        assert labels == p.labels


def test_gzip_export_is_byte_stable(tmp_path, corpus_units, vocab):
    prompts = gen_prompts(corpus_units[0], MaskStrategy(), vocab, t=2)
    g1 = tmp_path / "a.jsonl.gz"
    g2 = tmp_path / "b.jsonl.gz"
    export_training(prompts, g1)
    export_training(prompts, g2)
    assert g1.read_bytes() == g2.read_bytes()
    assert read_training(g1) == read_training(tmp_path / "b.jsonl.gz")
    with gzip.open(g1, "rt", encoding="utf-8") as fh:
        record = json.loads(fh.readline())
    assert set(record) == {"tokens", "labels"}


def test_export_filters_empty_label_prompts(tmp_path, micro_vocab, caplog):
    unit = unit_from(THREE_LINES, [LIST_ANN])
    p = gen_prompts(unit, MaskStrategy(), micro_vocab, t=0)[0]
    empty = type(p)(
        tokens=p.tokens, labels={}, block=p.block,
        masked_fqns=p.masked_fqns, focus_span=p.focus_span,
    )
    out = tmp_path / "t.jsonl"
    with caplog.at_level("WARNING"):
        assert export_training([empty], out) == 0
    assert out.read_text() == ""
    assert any("empty labels" in r.message for r in caplog.records)


def test_read_training_rejects_bad_records(tmp_path):
    bad = tmp_path / "bad.jsonl"
    bad.write_text('{"tokens": ["a"], "labels": {"5": "x"}}\n')
    with pytest.raises(MalformedRecord):
        read_training(bad)
    bad.write_text("not json\n")
    with pytest.raises(MalformedRecord):
        read_training(bad)
    bad.write_text('{"tokens": ["a"]}\n')
    with pytest.raises(MalformedRecord):
        read_training(bad)


def test_restore_sequence_substitutes_labels():
    assert restore_sequence(["[MASK]", "b", "[MASK]"], {0: "a", 2: "c"}) == ["a", "b", "c"]
