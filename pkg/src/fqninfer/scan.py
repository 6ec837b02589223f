"""Low-level lexical scanning shared by line splitting, annotation, and detection.

Nothing here parses Java. The scanner only tracks which characters sit inside
string/char literals or comments and where parentheses nest, which is enough
for the rest of the toolkit to reason about "plain code" characters without a
grammar.
"""

from __future__ import annotations

import logging

logger = logging.getLogger(__name__)

PLAIN = 0
LINE_COMMENT = 1
BLOCK_COMMENT = 2
STRING = 3
CHAR = 4


def classify_chars(text: str) -> bytes:
    """Classify each character as plain code, comment, or literal content.

    Returns one state byte per character (``PLAIN``, ``LINE_COMMENT``,
    ``BLOCK_COMMENT``, ``STRING``, ``CHAR``). Delimiters are classified as
    part of the region they open or close. Backslash escapes inside literals
    are honored. An unterminated literal or block comment extends to the end
    of the text and is reported as a warning rather than an error.
    """
    n = len(text)
    out = bytearray(n)
    state = PLAIN
    i = 0
    while i < n:
        ch = text[i]
        if state == PLAIN:
            if ch == '"':
                out[i] = STRING
                state = STRING
            elif ch == "'":
                out[i] = CHAR
                state = CHAR
            elif ch == "/" and i + 1 < n and text[i + 1] == "/":
                out[i] = LINE_COMMENT
                out[i + 1] = LINE_COMMENT
                state = LINE_COMMENT
                i += 1
            elif ch == "/" and i + 1 < n and text[i + 1] == "*":
                out[i] = BLOCK_COMMENT
                out[i + 1] = BLOCK_COMMENT
                state = BLOCK_COMMENT
                i += 1
            else:
                out[i] = PLAIN
        elif state == STRING:
            out[i] = STRING
            if ch == "\\" and i + 1 < n:
                out[i + 1] = STRING
                i += 1
            elif ch == '"':
                state = PLAIN
        elif state == CHAR:
            out[i] = CHAR
            if ch == "\\" and i + 1 < n:
                out[i + 1] = CHAR
                i += 1
            elif ch == "'":
                state = PLAIN
        elif state == LINE_COMMENT:
            if ch == "\n":
                out[i] = PLAIN
                state = PLAIN
            else:
                out[i] = LINE_COMMENT
        else:  # BLOCK_COMMENT
            out[i] = BLOCK_COMMENT
            if ch == "*" and i + 1 < n and text[i + 1] == "/":
                out[i + 1] = BLOCK_COMMENT
                i += 1
                state = PLAIN
        i += 1
    if state in (STRING, CHAR):
        logger.warning("unterminated literal treated as extending to end of text")
    elif state == BLOCK_COMMENT:
        logger.warning("unterminated block comment treated as extending to end of text")
    return bytes(out)


def scrub(text: str, states: bytes | None = None) -> str:
    """Replace every non-plain character with a space, preserving offsets.

    The result is safe for regex scanning: literal and comment content can no
    longer produce false matches, while every plain-code character keeps its
    original position.
    """
    if states is None:
        states = classify_chars(text)
    return "".join(ch if st == PLAIN else " " for ch, st in zip(text, states))


def top_level_semicolons(text: str, states: bytes | None = None) -> list[int]:
    """Offsets of plain-code semicolons at parenthesis nesting depth zero.

    Semicolons inside literals, comments, or parentheses (for-loop headers)
    are not included.
    """
    if states is None:
        states = classify_chars(text)
    offsets = []
    depth = 0
    for i, ch in enumerate(text):
        if states[i] != PLAIN:
            continue
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth = max(0, depth - 1)
        elif ch == ";" and depth == 0:
            offsets.append(i)
    return offsets
