"""Masked fill-in-blank prompt generation from annotated code.

A prompt is the focus line plus up to ``t`` adjacent code lines on each side,
tokenized with every annotated FQN written out in full. The characters the
FQN adds over the original code (the package prefix and its trailing dot for
a type name, the whole FQN for a receiver variable) are the maskable region;
the mask strategy decides which of those subtokens are replaced by the mask
token and recorded as labels.
"""

from __future__ import annotations

import gzip
import hashlib
import json
import logging
import random
from dataclasses import dataclass
from pathlib import Path

from fqninfer.corpus import KIND_RECEIVER, KIND_TYPE, AnnotatedUnit, CodeLine, FqnAnnotation
from fqninfer.errors import MalformedRecord, NoMaskableTokens
from fqninfer.tokenizer import TokenSequence, Vocab, tokenize

logger = logging.getLogger(__name__)

FULL_SPAN = "full_span"
RANDOM = "random"

DEFAULT_CONTEXT_LINES = 2
DEFAULT_WINDOW = 512


@dataclass(frozen=True)
class MaskStrategy:
    """Which maskable subtokens to mask: all of them, or a seeded sample."""

    variant: str = FULL_SPAN
    random_ratio: float = 0.15

    def __post_init__(self) -> None:
        if self.variant not in (FULL_SPAN, RANDOM):
            raise MalformedRecord(f"unknown mask strategy {self.variant!r}")
        if not 0.0 < self.random_ratio <= 1.0:
            raise MalformedRecord("random_ratio must be in (0, 1]")


@dataclass(frozen=True)
class ContextBlock:
    """The focus line with up to ``t`` code lines of context on each side."""

    unit: AnnotatedUnit
    prefix_lines: tuple[CodeLine, ...]
    focus_line: CodeLine
    suffix_lines: tuple[CodeLine, ...]
    t: int


@dataclass(frozen=True)
class FqnPrompt:
    """A masked training prompt.

    ``labels`` maps prompt token positions to the ground-truth token each
    mask replaced; positions always fall inside ``focus_span``, the token
    range the focus line occupies after truncation.
    """

    tokens: tuple[str, ...]
    labels: dict[int, str]
    block: ContextBlock
    masked_fqns: tuple[FqnAnnotation, ...]
    focus_span: tuple[int, int]

    @property
    def unit_id(self) -> str:
        return self.block.unit.unit.id

    @property
    def line_index(self) -> int:
        return self.block.focus_line.index


def collect_context(unit: AnnotatedUnit, line_index: int, t: int = DEFAULT_CONTEXT_LINES) -> ContextBlock:
    """Pick the focus line and up to ``t`` neighbors on each side, in order."""
    if t < 0:
        raise MalformedRecord("t must be >= 0")
    lines = unit.lines
    if not 0 <= line_index < len(lines):
        raise MalformedRecord(
            f"unit {unit.unit.id!r} has no line {line_index} (0..{len(lines) - 1})"
        )
    return ContextBlock(
        unit=unit,
        prefix_lines=lines[max(0, line_index - t) : line_index],
        focus_line=lines[line_index],
        suffix_lines=lines[line_index + 1 : line_index + 1 + t],
        t=t,
    )


def expand_line(
    text: str,
    annotations: tuple[FqnAnnotation, ...],
    skip_span: tuple[int, int] | None = None,
) -> tuple[str, list[tuple[int, int]], list[int]]:
    """Rewrite one line with its annotated FQNs written out in full.

    Type-name annotations gain the package prefix (including its trailing
    dot) in front of the surface; receiver annotations have the variable
    replaced by the whole FQN. ``skip_span`` names one annotation span to
    leave untouched (the point under inference). Returns the expanded text,
    the list of inserted character regions (the maskable regions), and a
    per-character offset map from original to expanded positions (with one
    trailing entry for the end offset).
    """
    ordered = sorted(annotations, key=lambda a: a.char_span[0])
    out: list[str] = []
    regions: list[tuple[int, int]] = []
    offset_map = list(range(len(text) + 1))
    pos = 0
    shift = 0

    def advance(upto: int) -> None:
        nonlocal pos
        out.append(text[pos:upto])
        for i in range(pos, upto + 1):
            offset_map[i] = i + shift
        pos = upto

    for ann in ordered:
        s, e = ann.char_span
        if skip_span is not None and (s, e) == tuple(skip_span):
            continue
        if text[s:e] != ann.surface:
            raise MalformedRecord(
                f"annotation surface {ann.surface!r} does not match line text "
                f"{text[s:e]!r} at {ann.char_span}"
            )
        advance(s)
        if ann.kind == KIND_TYPE:
            prefix = ann.fqn[: len(ann.fqn) - len(ann.surface)]
            start = s + shift
            out.append(prefix)
            shift += len(prefix)
            regions.append((start, start + len(prefix)))
            advance(e)
        else:  # KIND_RECEIVER: the variable is replaced wholesale
            start = s + shift
            out.append(ann.fqn)
            regions.append((start, start + len(ann.fqn)))
            shift += len(ann.fqn) - len(ann.surface)
            for i in range(s, e):
                offset_map[i] = start
            pos = e
            offset_map[e] = start + len(ann.fqn)
    advance(len(text))
    return "".join(out), regions, offset_map


def fit_window(
    prefix_seqs: list[TokenSequence],
    focus_len: int,
    suffix_seqs: list[TokenSequence],
    window: int,
) -> tuple[list[TokenSequence], list[TokenSequence]]:
    """Drop whole context lines until the prompt fits the token window.

    Lines are dropped from the outside in, alternating the last suffix line
    and the first prefix line, which keeps the focus line centered. The focus
    line itself is never touched; if it alone exceeds the window a warning is
    emitted and it is kept whole.
    """
    prefix = list(prefix_seqs)
    suffix = list(suffix_seqs)
    total = focus_len + sum(len(s) for s in prefix) + sum(len(s) for s in suffix)
    drop_suffix = True
    while total > window and (prefix or suffix):
        if drop_suffix and suffix or not prefix:
            total -= len(suffix.pop())
        else:
            total -= len(prefix.pop(0))
        drop_suffix = not drop_suffix
    if total > window:
        logger.warning(
            "focus line alone exceeds the %d-token window (%d tokens); kept whole",
            window,
            total,
        )
    return prefix, suffix


def _prompt_seed(global_seed: int, unit_id: str, line_index: int) -> int:
    digest = hashlib.sha256(f"{global_seed}:{unit_id}:{line_index}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


def mask_focus(
    block: ContextBlock,
    strategy: MaskStrategy,
    vocab: Vocab,
    rng_seed: int = 0,
    window: int = DEFAULT_WINDOW,
) -> FqnPrompt:
    """Tokenize a context block and mask the focus line's FQN subtokens.

    Context lines keep their FQNs fully written out. The maskable positions
    are exactly the focus-line tokens lying inside inserted FQN regions;
    ``full_span`` masks all of them, ``random`` masks a seeded sample of size
    ``max(1, round(ratio * n))``. The random seed is derived from
    (``rng_seed``, unit id, focus line index) so corpus order cannot change
    any prompt.
    """
    unit = block.unit
    focus_anns = unit.annotations_on(block.focus_line.index)
    if not focus_anns:
        raise NoMaskableTokens(
            f"unit {unit.unit.id!r} line {block.focus_line.index} has no annotations"
        )

    def expanded_tokens(line: CodeLine) -> TokenSequence:
        text, _, _ = expand_line(line.text, unit.annotations_on(line.index))
        return tokenize(text, vocab)

    prefix_seqs = [expanded_tokens(line) for line in block.prefix_lines]
    suffix_seqs = [expanded_tokens(line) for line in block.suffix_lines]
    focus_text, regions, _ = expand_line(block.focus_line.text, focus_anns)
    focus_seq = tokenize(focus_text, vocab)

    maskable_local = [
        i
        for i, span in enumerate(focus_seq.origin_spans)
        if any(rs <= span[0] and span[1] <= re for rs, re in regions)
    ]
    if not maskable_local:
        raise NoMaskableTokens(
            f"unit {unit.unit.id!r} line {block.focus_line.index}: annotations "
            "tokenize to zero maskable subtokens"
        )

    if strategy.variant == FULL_SPAN:
        chosen = maskable_local
    else:
        rng = random.Random(_prompt_seed(rng_seed, unit.unit.id, block.focus_line.index))
        k = min(len(maskable_local), max(1, int(strategy.random_ratio * len(maskable_local) + 0.5)))
        chosen = sorted(rng.sample(maskable_local, k))

    prefix_seqs, suffix_seqs = fit_window(prefix_seqs, len(focus_seq), suffix_seqs, window)
    chosen_set = set(chosen)
    offset = sum(len(s) for s in prefix_seqs)
    tokens = [t for s in prefix_seqs for t in s.tokens]
    labels: dict[int, str] = {}
    for i, token in enumerate(focus_seq.tokens):
        if i in chosen_set:
            labels[offset + i] = token
            tokens.append(vocab.mask_token)
        else:
            tokens.append(token)
    focus_span = (offset, offset + len(focus_seq))
    for s in suffix_seqs:
        tokens.extend(s.tokens)
    return FqnPrompt(
        tokens=tuple(tokens),
        labels=labels,
        block=block,
        masked_fqns=focus_anns,
        focus_span=focus_span,
    )


def gen_prompts(
    unit: AnnotatedUnit,
    strategy: MaskStrategy,
    vocab: Vocab,
    *,
    t: int = DEFAULT_CONTEXT_LINES,
    rng_seed: int = 0,
    window: int = DEFAULT_WINDOW,
) -> list[FqnPrompt]:
    """One prompt per annotated line of the unit, in line order.

    Prompts whose (tokens, labels) coincide with an earlier prompt are
    dropped with a warning so the output never contains duplicates.
    """
    prompts: list[FqnPrompt] = []
    seen = set()
    for line in unit.lines:
        if not unit.annotations_on(line.index):
            continue
        block = collect_context(unit, line.index, t)
        prompt = mask_focus(block, strategy, vocab, rng_seed=rng_seed, window=window)
        key = (prompt.tokens, tuple(sorted(prompt.labels.items())))
        if key in seen:
            logger.warning(
                "unit %r line %d: duplicate prompt dropped", unit.unit.id, line.index
            )
            continue
        seen.add(key)
        prompts.append(prompt)
    return prompts


def _write_text(path: Path, text: str) -> None:
    if path.suffix == ".gz":
        # gzip.compress writes no filename field and a zeroed timestamp, so
        # the bytes depend only on the content.
        path.write_bytes(gzip.compress(text.encode("utf-8"), mtime=0))
    else:
        path.write_text(text, encoding="utf-8")


def _open_read(path: Path):
    if path.suffix == ".gz":
        return gzip.open(path, "rt", encoding="utf-8")
    return open(path, encoding="utf-8")


def training_record(prompt: FqnPrompt) -> dict:
    """The wire form of one training example: masked tokens plus labels."""
    return {
        "tokens": list(prompt.tokens),
        "labels": {str(pos): tok for pos, tok in sorted(prompt.labels.items())},
    }


def export_training(prompts, path) -> int:
    """Write prompts as JSON lines ``{"tokens": [...], "labels": {pos: token}}``.

    Positions are 0-based and serialized as strings (JSON object keys).
    Prompts with empty label maps are filtered out with a warning. A ``.gz``
    suffix selects gzip output (with a zeroed timestamp so bytes are stable).
    Returns the number of records written.
    """
    path = Path(path)
    lines: list[str] = []
    for prompt in prompts:
        if not prompt.labels:
            logger.warning(
                "unit %r line %d: prompt with empty labels skipped",
                prompt.unit_id,
                prompt.line_index,
            )
            continue
        lines.append(json.dumps(training_record(prompt), separators=(",", ":")))
        lines.append("\n")
    _write_text(path, "".join(lines))
    return len(lines) // 2


def read_training(path) -> list[tuple[list[str], dict[int, str]]]:
    """Read a training file back as (tokens, labels) pairs."""
    out = []
    with _open_read(Path(path)) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
                tokens = list(record["tokens"])
                labels = {int(k): v for k, v in record["labels"].items()}
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise MalformedRecord(f"{path}:{lineno}: bad training record: {exc}") from None
            for pos in labels:
                if not 0 <= pos < len(tokens):
                    raise MalformedRecord(
                        f"{path}:{lineno}: label position {pos} outside tokens"
                    )
            out.append((tokens, labels))
    return out


def restore_sequence(tokens: list[str], labels: dict[int, str]) -> list[str]:
    """Undo masking: substitute each labeled position's ground-truth token."""
    restored = list(tokens)
    for pos, token in labels.items():
        restored[pos] = token
    return restored
