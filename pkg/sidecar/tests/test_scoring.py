"""Request validation and the scoring contract."""

import math

import pytest

from mlm_sidecar.errors import RequestError
from mlm_sidecar.scoring import _round_prob, score, validate_request

WINDOW = 16


def request(**overrides):
    base = {
        "tokens": ["java", ".", "[MASK]", "[MASK]"],
        "mask_positions": [2, 3],
        "top_k": 3,
    }
    base.update(overrides)
    return base


def test_valid_request_passes(micro_vocab):
    tokens, positions, top_k = validate_request(request(), micro_vocab, WINDOW)
    assert tokens == ["java", ".", "[MASK]", "[MASK]"]
    assert positions == [2, 3]
    assert top_k == 3


@pytest.mark.parametrize(
    "payload, message",
    [
        ([], "JSON object"),
        ({"tokens": ["[MASK]"]}, "missing fields"),
        (request(tokens=[]), "non-empty"),
        (request(tokens=["java", 3, "[MASK]"]), "strings"),
        (request(tokens=["nope", ".", "[MASK]", "[MASK]"]), "not in the served vocabulary"),
        (request(mask_positions=[]), "non-empty"),
        (request(mask_positions=["2"]), "integers"),
        (request(mask_positions=[True]), "integers"),
        (request(mask_positions=[9]), "outside tokens"),
        (request(mask_positions=[-1]), "outside tokens"),
        (request(mask_positions=[0]), "not \\[MASK\\]"),
        (request(mask_positions=[2, 2]), "duplicate"),
        (request(top_k=0), ">= 1"),
        (request(top_k="3"), ">= 1"),
        (request(top_k=True), ">= 1"),
    ],
)
def test_malformed_requests_are_400(micro_vocab, payload, message):
    with pytest.raises(RequestError, match=message) as exc_info:
        validate_request(payload, micro_vocab, WINDOW)
    assert exc_info.value.status == 400


def test_over_window_is_413(micro_vocab):
    payload = request(
        tokens=["[MASK]"] * (WINDOW + 1), mask_positions=[0], top_k=1
    )
    with pytest.raises(RequestError, match="exceed the model window") as exc_info:
        validate_request(payload, micro_vocab, WINDOW)
    assert exc_info.value.status == 413


def test_mask_position_on_real_token_is_rejected(micro_vocab):
    """A mask position must point at a [MASK] token, never a real one."""
    payload = request(mask_positions=[1, 2])
    with pytest.raises(RequestError, match="holds '\\.'"):
        validate_request(payload, micro_vocab, WINDOW)


def test_score_distribution_schema(micro_model, micro_vocab):
    tokens = ["java", ".", "[MASK]", "[MASK]", ";"]
    distributions = score(micro_model, micro_vocab, tokens, [2, 3], 5, 50)
    assert len(distributions) == 2
    for dist in distributions:
        assert 1 <= len(dist) <= 5
        probs = [e["p"] for e in dist]
        assert all(0.0 < p <= 1.0 for p in probs)
        assert probs == sorted(probs, reverse=True)
        assert math.fsum(probs) <= 1.0 + 1e-6
        assert all(e["token"] in micro_vocab.token_to_id for e in dist)


def test_score_is_deterministic(micro_model, micro_vocab):
    tokens = ["x", "=", "[MASK]", ";"]
    first = score(micro_model, micro_vocab, tokens, [2], 4, 50)
    second = score(micro_model, micro_vocab, tokens, [2], 4, 50)
    assert first == second


def test_top_k_is_capped(micro_model, micro_vocab):
    tokens = ["[MASK]"]
    by_request = score(micro_model, micro_vocab, tokens, [0], 2, 50)
    by_cap = score(micro_model, micro_vocab, tokens, [0], 10, 3)
    by_vocab = score(micro_model, micro_vocab, tokens, [0], 10_000, 10_000)
    assert len(by_request[0]) == 2
    assert len(by_cap[0]) == 3
    assert len(by_vocab[0]) == len(micro_vocab)


def test_all_positions_share_one_forward_pass(micro_model, micro_vocab):
    calls = []
    original = micro_model.forward

    def counting_forward(*args, **kwargs):
        calls.append(1)
        return original(*args, **kwargs)

    micro_model.forward = counting_forward
    try:
        score(micro_model, micro_vocab, ["[MASK]"] * 5, [0, 1, 2, 3, 4], 3, 50)
    finally:
        del micro_model.forward
    assert len(calls) == 1


def test_probability_rounding_is_stable():
    assert _round_prob(0.123456789) == 0.12345679
    assert _round_prob(0.5) == 0.5
    assert _round_prob(1e-12) == 1e-8
    assert _round_prob(1.0) == 1.0
