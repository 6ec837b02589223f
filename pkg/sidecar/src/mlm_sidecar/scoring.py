"""Wire-protocol request validation and fill-mask scoring.

A score request carries already-masked tokens; masking is the client's job
and the server never re-masks. One forward pass scores every masked
position jointly, and each position's distribution is the top-k tokens by
probability, ties broken by token id, rounded to eight decimals so that
serialized responses are stable.
"""

from __future__ import annotations

import torch

from mlm_sidecar.errors import RequestError
from mlm_sidecar.model import MaskedLm
from mlm_sidecar.vocab import MASK_TOKEN, SidecarVocab

PROB_DECIMALS = 8
PROB_FLOOR = 1e-8


def validate_request(
    payload: object, vocab: SidecarVocab, window: int
) -> tuple[list[str], list[int], int]:
    """Check a decoded request body; return (tokens, mask_positions, top_k).

    Violations raise :class:`RequestError` with status 400, except a token
    sequence longer than the model window, which is status 413.
    """
    if not isinstance(payload, dict):
        raise RequestError("request body must be a JSON object")
    missing = [k for k in ("tokens", "mask_positions", "top_k") if k not in payload]
    if missing:
        raise RequestError(f"missing fields: {missing}")

    tokens = payload["tokens"]
    if not isinstance(tokens, list) or not tokens:
        raise RequestError("tokens must be a non-empty list")
    if not all(isinstance(t, str) for t in tokens):
        raise RequestError("tokens must all be strings")
    if len(tokens) > window:
        raise RequestError(
            f"{len(tokens)} tokens exceed the model window of {window}", status=413
        )
    unknown = sorted({t for t in tokens if t not in vocab.token_to_id})
    if unknown:
        raise RequestError(f"tokens not in the served vocabulary: {unknown[:5]}")

    positions = payload["mask_positions"]
    if not isinstance(positions, list) or not positions:
        raise RequestError("mask_positions must be a non-empty list")
    seen: set[int] = set()
    for pos in positions:
        if isinstance(pos, bool) or not isinstance(pos, int):
            raise RequestError("mask_positions must all be integers")
        if not 0 <= pos < len(tokens):
            raise RequestError(f"mask position {pos} outside tokens")
        if tokens[pos] != MASK_TOKEN:
            raise RequestError(
                f"position {pos} holds {tokens[pos]!r}, not {MASK_TOKEN}"
            )
        if pos in seen:
            raise RequestError(f"duplicate mask position {pos}")
        seen.add(pos)

    top_k = payload["top_k"]
    if isinstance(top_k, bool) or not isinstance(top_k, int) or top_k < 1:
        raise RequestError("top_k must be an integer >= 1")

    return tokens, positions, top_k


def score(
    model: MaskedLm,
    vocab: SidecarVocab,
    tokens: list[str],
    positions: list[int],
    top_k: int,
    top_k_cap: int,
) -> list[list[dict[str, float | str]]]:
    """Score all mask positions with a single forward pass.

    Returns one probability-sorted entry list per requested position, in
    request order, each entry ``{"token": ..., "p": ...}``.
    """
    k = min(top_k, top_k_cap, len(vocab))
    ids = torch.tensor(
        [[vocab.token_to_id[t] for t in tokens]], dtype=torch.long
    )
    with torch.no_grad():
        logits = model(ids)[0]
        probs = torch.softmax(logits[positions], dim=-1)
    distributions = []
    for row in probs:
        values = row.tolist()
        order = sorted(range(len(values)), key=lambda i: (-values[i], i))[:k]
        distributions.append(
            [
                {"token": vocab.tokens[i], "p": _round_prob(values[i])}
                for i in order
            ]
        )
    return distributions


def _round_prob(p: float) -> float:
    """Stable serialization: eight decimals, floored away from zero."""
    return max(round(p, PROB_DECIMALS), PROB_FLOOR)
