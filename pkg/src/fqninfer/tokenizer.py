"""Subword tokenization over a plain-text vocabulary.

The tokenizer is greedy longest-match-first over a fixed vocabulary, in the
WordPiece style: pre-tokens are split on whitespace and punctuation (dots,
parens, brackets, and operator characters are single-character pre-tokens),
then each pre-token is decomposed into the longest vocabulary pieces, with
non-initial pieces carrying a continuation prefix. The vocabulary file format
is one token per line; the line number is the token id, so a served model's
vocabulary file can be dropped in verbatim.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path

from fqninfer.errors import MalformedRecord, UnknownTokenPresent

_PRETOKEN_RE = re.compile(r"[A-Za-z0-9_]+|[^A-Za-z0-9_\s]")
_WORDLIKE_RE = re.compile(r"[A-Za-z0-9_]")


@dataclass(frozen=True)
class Vocab:
    """An ordered token vocabulary with special-token conventions."""

    tokens: tuple[str, ...]
    continuation_prefix: str = "##"
    mask_token: str = "[MASK]"
    unk_token: str = "[UNK]"
    pad_token: str = "[PAD]"
    index: dict[str, int] = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self) -> None:
        index = {}
        for i, token in enumerate(self.tokens):
            if not token:
                raise MalformedRecord(f"vocab token {i} is empty")
            if token in index:
                raise MalformedRecord(f"duplicate vocab token {token!r}")
            index[token] = i
        for name in (self.mask_token, self.unk_token):
            if name not in index:
                raise MalformedRecord(f"vocab is missing required token {name!r}")
        object.__setattr__(self, "index", index)

    @classmethod
    def from_file(cls, path: str | Path, **kwargs) -> "Vocab":
        text = Path(path).read_text(encoding="utf-8")
        tokens = tuple(line for line in text.splitlines())
        if tokens and not tokens[-1]:
            tokens = tokens[:-1]
        return cls(tokens=tokens, **kwargs)

    def __contains__(self, token: str) -> bool:
        return token in self.index

    def __len__(self) -> int:
        return len(self.tokens)

    def id_of(self, token: str) -> int:
        try:
            return self.index[token]
        except KeyError:
            raise MalformedRecord(f"token {token!r} not in vocabulary") from None


@dataclass(frozen=True)
class TokenSequence:
    """Tokens plus, when produced by :func:`tokenize`, per-token char spans."""

    tokens: tuple[str, ...]
    origin_spans: tuple[tuple[int, int], ...] | None = None

    def __len__(self) -> int:
        return len(self.tokens)

    def __iter__(self):
        return iter(self.tokens)


def _decompose(word: str, span: tuple[int, int], vocab: Vocab):
    """Greedy longest-prefix decomposition of one pre-token.

    Yields (piece, (start, end)) pairs; falls back to a single unknown token
    covering the whole pre-token when no decomposition exists.
    """
    prefix = vocab.continuation_prefix
    pieces: list[tuple[str, tuple[int, int]]] = []
    pos = 0
    while pos < len(word):
        end = len(word)
        found = None
        while end > pos:
            candidate = word[pos:end]
            if pos > 0:
                candidate = prefix + candidate
            if candidate in vocab:
                found = (candidate, end)
                break
            end -= 1
        if found is None:
            return [(vocab.unk_token, span)]
        piece, end = found
        pieces.append((piece, (span[0] + pos, span[0] + end)))
        pos = end
    return pieces


def tokenize(text: str, vocab: Vocab) -> TokenSequence:
    """Tokenize ``text`` into vocabulary pieces with origin character spans.

    Pre-tokens that cannot be decomposed become the unknown token. The
    returned spans always point into ``text`` and are non-overlapping and
    ordered.
    """
    tokens: list[str] = []
    spans: list[tuple[int, int]] = []
    for m in _PRETOKEN_RE.finditer(text):
        for piece, span in _decompose(m.group(0), m.span(), vocab):
            tokens.append(piece)
            spans.append(span)
    return TokenSequence(tokens=tuple(tokens), origin_spans=tuple(spans))


def detokenize(tokens, vocab: Vocab) -> str:
    """Join tokens back into text.

    Continuation prefixes are stripped and merged with no space; a single
    space is inserted only between two adjacent non-continuation word-like
    tokens, so dots rejoin their neighbors without whitespace. Raises
    :class:`UnknownTokenPresent` if the unknown token appears.
    """
    if isinstance(tokens, TokenSequence):
        tokens = tokens.tokens
    prefix = vocab.continuation_prefix
    out: list[str] = []
    prev_wordlike_plain = False
    for token in tokens:
        if token == vocab.unk_token:
            raise UnknownTokenPresent("cannot detokenize a sequence containing the unknown token")
        if token.startswith(prefix) and len(token) > len(prefix):
            out.append(token[len(prefix) :])
            prev_wordlike_plain = False
            continue
        wordlike = bool(_WORDLIKE_RE.match(token))
        if out and wordlike and prev_wordlike_plain:
            out.append(" ")
        out.append(token)
        prev_wordlike_plain = wordlike
    return "".join(out)
