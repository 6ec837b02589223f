"""Evaluation metrics and report generation.

Covers exact-match accuracy, BLEU-2 over subword tokens, prompt-similarity
analysis against the training prompts, API-cardinality binning, and the
2x2 seen/unseen API-by-context split. Reports come out as JSON-ready dicts
and as aligned plain-text tables.
"""

from __future__ import annotations

import json
import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

from fqninfer.detect import InferencePoint
from fqninfer.errors import (
    EmptyInput,
    EmptyPrompt,
    EmptyReference,
    MalformedRecord,
)
from fqninfer.infer import Prediction, point_record
from fqninfer.promptgen import FqnPrompt, restore_sequence
from fqninfer.tokenizer import Vocab, tokenize

logger = logging.getLogger(__name__)

DEFAULT_THETA = 0.35
BLEU_EPSILON = 1e-9

#: Similarity ranges: (low, high, low-inclusive). The first range closes at
#: zero so every similarity in [0, 1] lands in exactly one bin.
SIMILARITY_BINS: tuple[tuple[float, float, bool], ...] = (
    (0.0, 0.15, True),
    (0.15, 0.25, False),
    (0.25, 0.35, False),
    (0.35, 0.45, False),
    (0.45, 0.55, False),
    (0.55, 0.65, False),
    (0.65, 0.88, False),
    (0.88, 1.0, False),
)

#: Cardinality ranges: exact counts 0..5, then half-open intervals. The zero
#: bin catches simple names absent from the training corpus.
CARDINALITY_BINS: tuple[tuple[int, float], ...] = (
    (0, 0),
    (1, 1),
    (2, 2),
    (3, 3),
    (4, 4),
    (5, 5),
    (5, 10),
    (10, 20),
    (20, 50),
    (50, 100),
    (100, 500),
    (500, 1000),
    (1000, math.inf),
)

_CELLS = (
    "seen_api/seen_context",
    "seen_api/unseen_context",
    "unseen_api/seen_context",
    "unseen_api/unseen_context",
)


def _check_fqn(fqn: str) -> None:
    parts = fqn.split(".")
    if len(parts) < 2 or not all(parts):
        raise MalformedRecord(f"gold FQN {fqn!r} must have at least two segments")


@dataclass(frozen=True)
class EvalRecord:
    """One scored inference point with its ground truth.

    ``prompt_tokens`` are the code-prompt tokens the prediction was made
    from (mask tokens included); they feed the prompt-similarity analysis.
    """

    point: InferencePoint
    gold_fqn: str
    prediction: Prediction
    library: str = ""
    prompt_tokens: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        _check_fqn(self.gold_fqn)
        object.__setattr__(self, "prompt_tokens", tuple(self.prompt_tokens))


def normalize_fqn(fqn: str, aliases: dict[str, str] | None = None) -> str:
    """Rewrite a known alias prefix (longest first) to its canonical form."""
    if not aliases:
        return fqn
    for alias in sorted(aliases, key=len, reverse=True):
        if fqn == alias or fqn.startswith(alias + "."):
            return aliases[alias] + fqn[len(alias) :]
    return fqn


def accuracy(records, aliases: dict[str, str] | None = None) -> float:
    """Fraction of records whose predicted FQN equals the gold FQN exactly.

    The optional alias table is applied to both sides before comparison so
    renamed package lineages can be counted as matches when desired.
    """
    records = list(records)
    if not records:
        raise EmptyInput("accuracy needs at least one record")
    hits = sum(
        1
        for r in records
        if normalize_fqn(r.prediction.fqn, aliases) == normalize_fqn(r.gold_fqn, aliases)
    )
    return hits / len(records)


def _ngram_counts(tokens: list[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def bleu2(candidate, reference) -> float:
    """BLEU-2: uniform weights over 1- and 2-gram modified precisions.

    Brevity penalty exp(1 - r/c) applies when the candidate is shorter than
    the reference. A zero n-gram match count is smoothed to 1e-9. A
    single-token candidate is scored by its unigram precision alone (it has
    no 2-grams to measure); an empty candidate scores 0.
    """
    cand = list(candidate)
    ref = list(reference)
    if not ref:
        raise EmptyReference("BLEU reference must be non-empty")
    c, r = len(cand), len(ref)
    if c == 0:
        return 0.0
    bp = 1.0 if c >= r else math.exp(1.0 - r / c)

    def precision(n: int) -> float:
        cand_counts = _ngram_counts(cand, n)
        ref_counts = _ngram_counts(ref, n)
        matched = sum(min(count, ref_counts[g]) for g, count in cand_counts.items())
        total = sum(cand_counts.values())
        return (matched if matched > 0 else BLEU_EPSILON) / total

    p1 = precision(1)
    if c < 2:
        return bp * p1
    p2 = precision(2)
    return bp * math.exp(0.5 * math.log(p1) + 0.5 * math.log(p2))


def token_bag(tokens, vocab: Vocab) -> frozenset[str]:
    """The set of distinct tokens in a prompt, mask tokens removed."""
    return frozenset(t for t in tokens if t != vocab.mask_token)


def prompt_similarity(code_bag: frozenset[str], training_bags) -> float:
    """Highest |training bag ∩ code bag| / |code bag| over all training bags."""
    if not code_bag:
        raise EmptyPrompt("code prompt token bag is empty")
    best = 0.0
    size = len(code_bag)
    for bag in training_bags:
        overlap = len(bag & code_bag) / size
        if overlap > best:
            best = overlap
    return best


def _cardinality_index(fqns) -> dict[str, int]:
    by_name: dict[str, set[str]] = {}
    for fqn in fqns:
        by_name.setdefault(fqn.rsplit(".", 1)[-1], set()).add(fqn)
    return {name: len(group) for name, group in by_name.items()}


@dataclass
class SplitManifest:
    """What the training run saw: its FQNs, its prompt token bags, and θ."""

    training_fqns: frozenset[str]
    training_bags: tuple[frozenset[str], ...]
    theta: float = DEFAULT_THETA
    cardinality_index: dict[str, int] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not 0.0 < self.theta < 1.0:
            raise MalformedRecord(f"theta must be in (0, 1), got {self.theta}")
        if not self.cardinality_index:
            self.cardinality_index = _cardinality_index(self.training_fqns)


def build_manifest(
    units, prompts, vocab: Vocab, theta: float = DEFAULT_THETA
) -> SplitManifest:
    """Collect training FQNs and prompt token bags into a manifest.

    Prompt bags are taken over the restored (unmasked) token sequences, so
    the bag reflects the prompt's full content including the FQN subtokens.
    """
    fqns = frozenset(ann.fqn for unit in units for ann in unit.annotations)
    bags = []
    for prompt in prompts:
        if isinstance(prompt, FqnPrompt):
            tokens = restore_sequence(list(prompt.tokens), prompt.labels)
        else:
            tokens, labels = prompt
            tokens = restore_sequence(list(tokens), labels)
        bags.append(token_bag(tokens, vocab))
    return SplitManifest(
        training_fqns=fqns, training_bags=tuple(bags), theta=theta
    )


def save_manifest(manifest: SplitManifest, path) -> None:
    payload = {
        "theta": manifest.theta,
        "training_fqns": sorted(manifest.training_fqns),
        "training_bags": [sorted(bag) for bag in manifest.training_bags],
    }
    Path(path).write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def load_manifest(path) -> SplitManifest:
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
        return SplitManifest(
            training_fqns=frozenset(payload["training_fqns"]),
            training_bags=tuple(frozenset(bag) for bag in payload["training_bags"]),
            theta=float(payload["theta"]),
        )
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise MalformedRecord(f"{path}: bad split manifest: {exc}") from None


def cardinality(simple_name: str, manifest: SplitManifest) -> int:
    """How many distinct training FQNs end in this simple name."""
    return manifest.cardinality_index.get(simple_name, 0)


@dataclass
class BinStats:
    """Accumulated outcomes for one report bin."""

    label: str
    count: int = 0
    hits: int = 0
    bleu_sum: float = 0.0

    def add(self, correct: bool, bleu: float) -> None:
        self.count += 1
        self.hits += 1 if correct else 0
        self.bleu_sum += bleu

    @property
    def accuracy(self) -> float | None:
        return self.hits / self.count if self.count else None

    @property
    def mean_bleu2(self) -> float | None:
        return self.bleu_sum / self.count if self.count else None

    def as_dict(self) -> dict:
        return {
            "label": self.label,
            "count": self.count,
            "accuracy": self.accuracy,
            "mean_bleu2": self.mean_bleu2,
        }


def _similarity_label(low: float, high: float, low_inclusive: bool) -> str:
    open_b = "[" if low_inclusive else "("
    return f"{open_b}{low:.2f}, {high:.2f}]"


def _cardinality_label(low: int, high: float) -> str:
    if low == high:
        return str(low)
    if math.isinf(high):
        return f"({low}, +inf)"
    return f"({low}, {int(high)}]"


@dataclass
class SplitReport:
    """The 2x2 seen/unseen table plus similarity and cardinality bins."""

    theta: float
    total: int
    cells: dict[str, BinStats]
    similarity_bins: list[BinStats]
    cardinality_bins: list[BinStats]

    def to_dict(self) -> dict:
        return {
            "theta": self.theta,
            "total": self.total,
            "cells": {key: self.cells[key].as_dict() for key in _CELLS},
            "similarity_bins": [b.as_dict() for b in self.similarity_bins],
            "cardinality_bins": [b.as_dict() for b in self.cardinality_bins],
        }

    def format_text(self) -> str:
        def fmt(value: float | None) -> str:
            return f"{value:.3f}" if value is not None else "-"

        def table(title: str, rows: list[BinStats]) -> list[str]:
            width = max([len(r.label) for r in rows] + [len("bin")])
            out = [title, f"  {'bin':<{width}}  count  accuracy  BLEU-2"]
            for r in rows:
                out.append(
                    f"  {r.label:<{width}}  {r.count:>5}  {fmt(r.accuracy):>8}  "
                    f"{fmt(r.mean_bleu2):>6}"
                )
            return out

        lines = [f"records: {self.total}    context threshold: {self.theta}"]
        lines += table("API x context split", [self.cells[key] for key in _CELLS])
        lines += table("Prompt similarity ranges", self.similarity_bins)
        lines += table("API cardinality ranges", self.cardinality_bins)
        return "\n".join(lines) + "\n"


def _similarity_bin(sim: float, bins: list[BinStats]) -> BinStats:
    for (low, high, low_inclusive), stats in zip(SIMILARITY_BINS, bins):
        if (sim > low or (low_inclusive and sim == low)) and sim <= high:
            return stats
    raise AssertionError(f"similarity {sim} outside [0, 1]")


def _cardinality_bin(card: int, bins: list[BinStats]) -> BinStats:
    for (low, high), stats in zip(CARDINALITY_BINS, bins):
        if (card == low == high) or (low != high and low < card <= high):
            return stats
    raise AssertionError(f"cardinality {card} unbinnable")


def split_report(
    records,
    manifest: SplitManifest,
    vocab: Vocab,
    aliases: dict[str, str] | None = None,
) -> SplitReport:
    """Bin every record by API seenness, context similarity, and cardinality.

    A record's API is seen when its gold FQN occurs in the training set; its
    context is seen when the prompt's best similarity against the training
    bags strictly exceeds θ. Each bin reports count, exact accuracy, and
    mean BLEU-2 of predicted versus gold subtokens.
    """
    records = list(records)
    cells = {key: BinStats(label=key) for key in _CELLS}
    sim_bins = [BinStats(label=_similarity_label(*b)) for b in SIMILARITY_BINS]
    card_bins = [BinStats(label=_cardinality_label(*b)) for b in CARDINALITY_BINS]
    for record in records:
        sim = prompt_similarity(
            token_bag(record.prompt_tokens, vocab), manifest.training_bags
        )
        correct = normalize_fqn(record.prediction.fqn, aliases) == normalize_fqn(
            record.gold_fqn, aliases
        )
        bleu = bleu2(
            tokenize(record.prediction.fqn, vocab).tokens,
            tokenize(record.gold_fqn, vocab).tokens,
        )
        api_seen = record.gold_fqn in manifest.training_fqns
        ctx_seen = sim > manifest.theta
        key = (
            f"{'seen' if api_seen else 'unseen'}_api/"
            f"{'seen' if ctx_seen else 'unseen'}_context"
        )
        cells[key].add(correct, bleu)
        _similarity_bin(sim, sim_bins).add(correct, bleu)
        card = cardinality(record.gold_fqn.rsplit(".", 1)[-1], manifest)
        _cardinality_bin(card, card_bins).add(correct, bleu)
    return SplitReport(
        theta=manifest.theta,
        total=len(records),
        cells=cells,
        similarity_bins=sim_bins,
        cardinality_bins=card_bins,
    )


def record_to_dict(record: EvalRecord) -> dict:
    p = record.prediction
    return {
        "point": point_record(record.point),
        "gold_fqn": record.gold_fqn,
        "library": record.library,
        "prompt_tokens": list(record.prompt_tokens),
        "prediction": {
            "fqn": p.fqn,
            "span_len": p.span_len,
            "score": p.score,
            "fallback": p.fallback,
        },
    }


def record_from_dict(data: dict) -> EvalRecord:
    try:
        pt = data["point"]
        point = InferencePoint(
            kind=pt["kind"],
            line_index=int(pt["line"]),
            char_span=(int(pt["span"][0]), int(pt["span"][1])),
            simple_name=pt["name"],
        )
        pred = data["prediction"]
        prediction = Prediction(
            fqn=pred["fqn"],
            span_len=int(pred["span_len"]),
            score=float(pred["score"]),
            per_token=(),
            fallback=bool(pred.get("fallback", False)),
        )
        return EvalRecord(
            point=point,
            gold_fqn=data["gold_fqn"],
            prediction=prediction,
            library=data.get("library", ""),
            prompt_tokens=tuple(data.get("prompt_tokens", ())),
        )
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise MalformedRecord(f"bad eval record: {exc}") from None


def save_records(records, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record_to_dict(record), separators=(",", ":")))
            fh.write("\n")


def load_records(path) -> list[EvalRecord]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                data = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedRecord(f"{path}:{lineno}: {exc}") from None
            out.append(record_from_dict(data))
    return out
