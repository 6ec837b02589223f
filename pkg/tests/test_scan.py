"""Character classification and scrubbing oracles."""

from fqninfer import scan


def classify(text: str) -> str:
    """Render states as a compact string for frozen comparisons."""
    names = {
        scan.PLAIN: ".",
        scan.LINE_COMMENT: "L",
        scan.BLOCK_COMMENT: "B",
        scan.STRING: "S",
        scan.CHAR: "C",
    }
    return "".join(names[s] for s in scan.classify_chars(text))


def test_plain_code_is_all_plain():
    assert classify("int x = 1;") == ".........."


def test_string_literal_including_quotes():
    #       int s = "a;b" ;
    text = 'int s = "a;b";'
    assert classify(text) == "........SSSSS."


def test_escaped_quote_stays_in_string():
    text = 'x = "a\\"b";'
    assert classify(text) == "....SSSSSS."


def test_char_literal():
    text = "char c = ';';"
    assert classify(text) == ".........CCC."


def test_line_comment_ends_at_newline():
    text = "a; // x;\nb;"
    assert classify(text) == "...LLLLL.\n.".replace("\n", ".")


def test_block_comment_spans_lines():
    text = "a;/*x;\ny*/b;"
    assert classify(text) == "..BBBBBBBB.."


def test_unterminated_string_extends_to_end():
    assert classify('x = "abc') == "....SSSS"


def test_scrub_preserves_offsets():
    text = 'call("se;mi") // done'
    scrubbed = scan.scrub(text)
    assert len(scrubbed) == len(text)
    assert scrubbed == "call(       )        "
    assert scrubbed.index(")") == text.index(")")


def test_top_level_semicolons_skip_literals_comments_parens():
    text = 'a; for (int i = 0; i < n; i++) b("x;"); // c;'
    offsets = scan.top_level_semicolons(text)
    assert offsets == [1, 38]
    assert all(text[i] == ";" for i in offsets)


def test_top_level_semicolons_plain_sequence():
    text = "a;b;c;"
    assert scan.top_level_semicolons(text) == [1, 3, 5]
