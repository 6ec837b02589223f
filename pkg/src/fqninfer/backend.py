"""Fill-mask scoring backends.

A backend answers one question: given a token sequence with mask tokens at
known positions, what is the probability distribution over the vocabulary at
each masked position? Three implementations are provided: a deterministic
n-gram scorer (the offline reference), a remote HTTP client speaking the
``/v1/score`` wire protocol, and a scripted backend for tests.

The n-gram scorer fills masks left to right using only preceding context, so
it is a left-context approximation of bidirectional masked-LM scoring; it
exists to exercise the span-search machinery, not to claim MLM parity.
"""

from __future__ import annotations

import logging
import math
import struct
import threading
import time
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol

import requests

from fqninfer.errors import (
    BackendUnavailable,
    EmptyCorpus,
    MalformedRecord,
    ProtocolError,
    VocabMismatch,
)
from fqninfer.tokenizer import Vocab

logger = logging.getLogger(__name__)

DEFAULT_ORDER = 4
DEFAULT_ALPHA = 1.0
BACKOFF_SCALE = 0.4
DEFAULT_TOP_K = 10

_MAGIC = b"FQNGRAM\x00"
_VERSION = 1

#: One (token, probability) list per masked position, probabilities descending.
MaskDistribution = list  # list[list[tuple[str, float]]]


@dataclass(frozen=True)
class ScoreRequest:
    """Tokens with masks in place, the mask positions, and how many candidates."""

    tokens: tuple[str, ...]
    mask_positions: tuple[int, ...]
    top_k: int = DEFAULT_TOP_K

    def __post_init__(self) -> None:
        object.__setattr__(self, "tokens", tuple(self.tokens))
        object.__setattr__(self, "mask_positions", tuple(self.mask_positions))
        if self.top_k < 1:
            raise MalformedRecord("top_k must be >= 1")
        if not self.mask_positions:
            raise MalformedRecord("mask_positions must be non-empty")
        last = -1
        for pos in self.mask_positions:
            if pos <= last:
                raise MalformedRecord("mask_positions must be strictly increasing")
            if not 0 <= pos < len(self.tokens):
                raise MalformedRecord(f"mask position {pos} outside tokens")
            last = pos


class FillMaskBackend(Protocol):
    """Anything that can score masked positions."""

    def score(self, request: ScoreRequest) -> MaskDistribution: ...


def _check_masks(request: ScoreRequest, mask_token: str) -> None:
    for pos in request.mask_positions:
        if request.tokens[pos] != mask_token:
            raise MalformedRecord(
                f"token at mask position {pos} is {request.tokens[pos]!r}, "
                f"not {mask_token!r}"
            )


@dataclass
class NgramModel:
    """Count tables for orders 1..n with Laplace smoothing parameters.

    ``counts[k]`` maps a (k-1)-token context tuple to a Counter of next
    tokens. Counts are plain observation counts; smoothing and backoff are
    applied at scoring time. The model keeps a reference to the vocabulary it
    was trained against.
    """

    order: int
    alpha: float
    vocab: Vocab
    counts: dict[int, dict[tuple[str, ...], Counter]] = field(repr=False)
    totals: dict[tuple[str, ...], int] = field(repr=False)

    def __post_init__(self) -> None:
        if self.order < 1:
            raise MalformedRecord("order must be >= 1")
        if self.alpha <= 0:
            raise MalformedRecord("alpha must be > 0")


def train_ngram(
    sequences,
    vocab: Vocab,
    order: int = DEFAULT_ORDER,
    alpha: float = DEFAULT_ALPHA,
) -> NgramModel:
    """Accumulate n-gram counts of all orders 1..``order`` over the sequences.

    Sequences are unmasked token lists. Positions near a sequence start
    simply contribute their shorter contexts (no sentinel tokens enter the
    tables), so training is order-independent over the input multiset.
    Raises :class:`EmptyCorpus` when no sequence is given.
    """
    counts: dict[int, dict[tuple[str, ...], Counter]] = {k: {} for k in range(1, order + 1)}
    seen_any = False
    for seq in sequences:
        seq = list(seq)
        if not seq:
            continue
        seen_any = True
        for i, token in enumerate(seq):
            for k in range(1, order + 1):
                if k - 1 > i:
                    break
                context = tuple(seq[i - (k - 1) : i])
                table = counts[k]
                counter = table.get(context)
                if counter is None:
                    counter = table[context] = Counter()
                counter[token] += 1
    if not seen_any:
        raise EmptyCorpus("no training sequences")
    totals = {
        context: sum(counter.values())
        for table in counts.values()
        for context, counter in table.items()
    }
    return NgramModel(order=order, alpha=alpha, vocab=vocab, counts=counts, totals=totals)


def _context_distribution(
    model: NgramModel, context: tuple[str, ...], top_k: int
) -> list[tuple[str, float]]:
    """Smoothed distribution for one position given its left context.

    The longest context with any observations wins; each order dropped below
    that multiplies the distribution by the backoff scale. Probabilities are
    Laplace-smoothed count ratios, so the full-order case is the closed form
    ``(count + alpha) / (total + alpha * V)``.
    """
    vocab_size = len(model.vocab)
    alpha = model.alpha
    scale = 1.0
    for k in range(min(model.order, len(context) + 1), 0, -1):
        ctx = context[len(context) - (k - 1) :] if k > 1 else ()
        counter = model.counts.get(k, {}).get(ctx)
        if counter is None and k > 1:
            scale *= BACKOFF_SCALE
            continue
        observed = counter or Counter()
        total = model.totals.get(ctx, 0) if counter is not None else 0
        denom = total + alpha * vocab_size
        ranked = sorted(observed.items(), key=lambda kv: (-kv[1], kv[0]))
        out = [(tok, scale * (cnt + alpha) / denom) for tok, cnt in ranked[:top_k]]
        if len(out) < top_k:
            seen = {tok for tok, _ in out}
            floor = scale * alpha / denom
            for tok in sorted(model.vocab.tokens):
                if tok not in seen:
                    out.append((tok, floor))
                    if len(out) == top_k:
                        break
        return out
    raise AssertionError("unigram order is always available")


def ngram_score(model: NgramModel, request: ScoreRequest) -> MaskDistribution:
    """Score mask positions left to right.

    Each position's distribution conditions on the preceding ``order - 1``
    tokens, with earlier masked positions replaced by their own argmax
    before later positions are scored. Ties rank the lexicographically
    smaller token first, so the argmax is unique.
    """
    _check_masks(request, model.vocab.mask_token)
    tokens = list(request.tokens)
    distributions: MaskDistribution = []
    for pos in request.mask_positions:
        context = tuple(tokens[max(0, pos - (model.order - 1)) : pos])
        dist = _context_distribution(model, context, request.top_k)
        distributions.append(dist)
        tokens[pos] = dist[0][0]
    return distributions


@dataclass
class NgramBackend:
    """Local deterministic backend over a trained n-gram model."""

    model: NgramModel

    def score(self, request: ScoreRequest) -> MaskDistribution:
        return ngram_score(self.model, request)


def save_model(model: NgramModel, path) -> None:
    """Serialize count tables as length-prefixed binary with a magic header."""

    def put_str(parts: list[bytes], s: str) -> None:
        raw = s.encode("utf-8")
        parts.append(struct.pack("<H", len(raw)))
        parts.append(raw)

    parts: list[bytes] = [_MAGIC, bytes([_VERSION])]
    parts.append(struct.pack("<Bd", model.order, model.alpha))
    digest = vocab_digest(model.vocab)
    parts.append(digest.encode("ascii"))
    for k in range(1, model.order + 1):
        table = model.counts.get(k, {})
        parts.append(struct.pack("<I", len(table)))
        for context in sorted(table):
            parts.append(struct.pack("<B", len(context)))
            for token in context:
                put_str(parts, token)
            counter = table[context]
            parts.append(struct.pack("<I", len(counter)))
            for token in sorted(counter):
                put_str(parts, token)
                parts.append(struct.pack("<Q", counter[token]))
    Path(path).write_bytes(b"".join(parts))


def load_model(path, vocab: Vocab) -> NgramModel:
    """Load a serialized model, verifying the vocabulary digest."""
    blob = Path(path).read_bytes()
    view = memoryview(blob)
    if bytes(view[:8]) != _MAGIC:
        raise MalformedRecord(f"{path}: not an n-gram model file")
    if view[8] != _VERSION:
        raise MalformedRecord(f"{path}: unsupported model version {view[8]}")
    offset = 9
    order, alpha = struct.unpack_from("<Bd", view, offset)
    offset += struct.calcsize("<Bd")
    stored_digest = bytes(view[offset : offset + 64]).decode("ascii")
    offset += 64
    if stored_digest != vocab_digest(vocab):
        raise VocabMismatch(
            f"{path}: model was trained against a different vocabulary"
        )

    def get_str() -> str:
        nonlocal offset
        (length,) = struct.unpack_from("<H", view, offset)
        offset += 2
        s = bytes(view[offset : offset + length]).decode("utf-8")
        offset += length
        return s

    counts: dict[int, dict[tuple[str, ...], Counter]] = {}
    for k in range(1, order + 1):
        (n_contexts,) = struct.unpack_from("<I", view, offset)
        offset += 4
        table: dict[tuple[str, ...], Counter] = {}
        for _ in range(n_contexts):
            (ctx_len,) = struct.unpack_from("<B", view, offset)
            offset += 1
            context = tuple(get_str() for _ in range(ctx_len))
            (n_cont,) = struct.unpack_from("<I", view, offset)
            offset += 4
            counter = Counter()
            for _ in range(n_cont):
                token = get_str()
                (count,) = struct.unpack_from("<Q", view, offset)
                offset += 8
                counter[token] = count
            table[context] = counter
        counts[k] = table
    totals = {
        context: sum(counter.values())
        for table in counts.values()
        for context, counter in table.items()
    }
    return NgramModel(order=order, alpha=alpha, vocab=vocab, counts=counts, totals=totals)


def vocab_digest(vocab: Vocab) -> str:
    """SHA-256 over the vocabulary tokens, one per line, as the file stores them."""
    import hashlib

    h = hashlib.sha256()
    for token in vocab.tokens:
        h.update(token.encode("utf-8"))
        h.update(b"\n")
    return h.hexdigest()


@dataclass
class ScriptedBackend:
    """Plays back pre-configured distributions, keyed by mask-span length.

    ``by_length[L]`` is either one distribution (replicated across the span)
    or a list of per-position distributions of length ``L``. Used by tests
    and by the CLI's ``scripted`` backend kind.
    """

    by_length: dict[int, list]
    default: list | None = None

    def score(self, request: ScoreRequest) -> MaskDistribution:
        length = len(request.mask_positions)
        entry = self.by_length.get(length, self.default)
        if entry is None:
            raise BackendUnavailable(f"no scripted distribution for span length {length}")
        if entry and isinstance(entry[0], (tuple, list)) and isinstance(entry[0][0], str):
            entry = [entry] * length
        if len(entry) != length:
            raise MalformedRecord(
                f"scripted entry for length {length} has {len(entry)} positions"
            )
        return [[(tok, float(p)) for tok, p in dist][: request.top_k] for dist in entry]

    @classmethod
    def from_file(cls, path) -> "ScriptedBackend":
        import json

        data = json.loads(Path(path).read_text(encoding="utf-8"))
        by_length = {
            int(length): [[(d["token"], d["p"]) for d in dist] for dist in dists]
            for length, dists in data.get("by_length", {}).items()
        }
        default = None
        if "default" in data:
            # A single distribution, replicated across the span at score time.
            default = [(d["token"], d["p"]) for d in data["default"]]
        return cls(by_length=by_length, default=default)


@dataclass
class RemoteBackend:
    """HTTP client for the ``POST /v1/score`` wire protocol.

    Requests are retried with exponential backoff on connection errors,
    timeouts, and 503 (model not ready); after the retry budget the failure
    surfaces as :class:`BackendUnavailable`. Responses are schema-checked and,
    when a vocabulary is supplied, every returned token must belong to it.
    In-flight requests are bounded by a semaphore.
    """

    base_url: str
    vocab: Vocab | None = None
    timeout: float = 30.0
    retries: int = 3
    backoff: float = 0.5
    max_in_flight: int = 4
    session: requests.Session | None = None
    _gate: threading.Semaphore = field(init=False, repr=False)

    def __post_init__(self) -> None:
        self.base_url = self.base_url.rstrip("/")
        self._gate = threading.Semaphore(self.max_in_flight)
        if self.session is None:
            self.session = requests.Session()

    def score(self, request: ScoreRequest) -> MaskDistribution:
        payload = {
            "tokens": list(request.tokens),
            "mask_positions": list(request.mask_positions),
            "top_k": request.top_k,
        }
        last_error: Exception | None = None
        with self._gate:
            for attempt in range(self.retries):
                if attempt:
                    time.sleep(self.backoff * 2 ** (attempt - 1))
                try:
                    response = self.session.post(
                        f"{self.base_url}/v1/score", json=payload, timeout=self.timeout
                    )
                except (requests.ConnectionError, requests.Timeout) as exc:
                    last_error = exc
                    continue
                if response.status_code == 503:
                    last_error = BackendUnavailable("backend replied 503 (not ready)")
                    continue
                if response.status_code != 200:
                    raise ProtocolError(
                        f"backend replied HTTP {response.status_code}: "
                        f"{response.text[:200]}"
                    )
                return self._parse(response, request)
        raise BackendUnavailable(
            f"backend at {self.base_url} unreachable after {self.retries} attempts: "
            f"{last_error}"
        )

    def _parse(self, response, request: ScoreRequest) -> MaskDistribution:
        try:
            body = response.json()
        except ValueError as exc:
            raise ProtocolError(f"backend returned invalid JSON: {exc}") from None
        if not isinstance(body, dict) or "distributions" not in body:
            raise ProtocolError("backend response missing 'distributions'")
        raw = body["distributions"]
        if not isinstance(raw, list) or len(raw) != len(request.mask_positions):
            raise ProtocolError(
                f"expected {len(request.mask_positions)} distributions, "
                f"got {len(raw) if isinstance(raw, list) else type(raw).__name__}"
            )
        distributions: MaskDistribution = []
        for dist in raw:
            if not isinstance(dist, list) or not dist or len(dist) > request.top_k:
                raise ProtocolError("distribution entry count violates top_k")
            parsed = []
            prev = math.inf
            total = 0.0
            for item in dist:
                if not isinstance(item, dict) or "token" not in item or "p" not in item:
                    raise ProtocolError("distribution item must have 'token' and 'p'")
                token, p = item["token"], item["p"]
                if not isinstance(token, str) or not isinstance(p, (int, float)):
                    raise ProtocolError("distribution item has wrong types")
                if not 0.0 < p <= 1.0:
                    raise ProtocolError(f"probability {p} outside (0, 1]")
                if p > prev:
                    raise ProtocolError("probabilities must be non-increasing")
                if self.vocab is not None and token not in self.vocab:
                    raise VocabMismatch(f"backend returned unknown token {token!r}")
                prev = p
                total += p
                parsed.append((token, float(p)))
            if total > 1.0 + 1e-6:
                raise ProtocolError(f"distribution sums to {total} > 1")
            distributions.append(parsed)
        return distributions
