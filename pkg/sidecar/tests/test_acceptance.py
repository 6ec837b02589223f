"""End-to-end guarantees against the wire-protocol contract partner.

The fqninfer package is the reference client: its remote backend speaks the
same protocol this server implements, and its prompt generator produced the
committed request fixtures. These tests put a real server on a localhost
socket and check, first, that 50 fixture requests get byte-identical
responses to the committed golden file and parse identically through the
client, and second, that a few epochs of fine-tuning on one library's
training export strictly improve span recovery on a 100-point evaluation
set, with everything flowing over HTTP.
"""

from __future__ import annotations

import json
import random

import pytest
import requests

from fqninfer.backend import RemoteBackend, ScoreRequest
from fqninfer.corpus import load_corpus
from fqninfer.promptgen import MaskStrategy, export_training, gen_prompts
from fqninfer.tokenizer import Vocab

from conftest import LiveServer, make_state
from mlm_sidecar.model import ModelConfig, build_model
from mlm_sidecar.server import create_app
from mlm_sidecar.training import finetune, read_training_file

EVAL_POINTS = 100
TUNING_EPOCHS = 3


# ------------------------------------------------------------- wire parity


def load_fixture_lines(path):
    return [line for line in path.read_bytes().split(b"\n") if line]


def test_wire_parity_against_golden_responses(
    live_base_server, sidecar_fixtures, vocab_path
):
    request_lines = load_fixture_lines(sidecar_fixtures / "requests.jsonl")
    golden_lines = load_fixture_lines(sidecar_fixtures / "golden_responses.jsonl")
    assert len(request_lines) == len(golden_lines) == 50

    client_vocab = Vocab.from_file(vocab_path)
    backend = RemoteBackend(base_url=live_base_server.base_url, vocab=client_vocab)

    for request_line, golden_line in zip(request_lines, golden_lines):
        raw = requests.post(
            f"{live_base_server.base_url}/v1/score",
            data=request_line,
            headers={"content-type": "application/json"},
            timeout=30,
        )
        assert raw.status_code == 200
        assert raw.content == golden_line

        payload = json.loads(request_line)
        distributions = backend.score(
            ScoreRequest(
                tokens=tuple(payload["tokens"]),
                mask_positions=tuple(payload["mask_positions"]),
                top_k=payload["top_k"],
            )
        )
        golden = [
            [(entry["token"], entry["p"]) for entry in dist]
            for dist in json.loads(golden_line)["distributions"]
        ]
        assert distributions == golden


def test_health_and_vocab_over_the_socket(live_base_server, vocab_path):
    health = requests.get(f"{live_base_server.base_url}/v1/health", timeout=30)
    assert health.status_code == 200
    assert health.json() == {"status": "ok", "window": 512}
    served = requests.get(f"{live_base_server.base_url}/v1/vocab", timeout=30)
    assert served.content == vocab_path.read_bytes()


# ----------------------------------------------------------- tuning gain


@pytest.fixture(scope="module")
def exports(tmp_path_factory, primary_fixtures):
    """One library's training export plus a 100-point evaluation sample."""
    out = tmp_path_factory.mktemp("exports")
    units = load_corpus(primary_fixtures / "memorization.jsonl")
    pvocab = Vocab.from_file(primary_fixtures / "vocab.txt")

    library_prompts = [
        p
        for unit in units
        if unit.unit.library == "memlib0"
        for p in gen_prompts(unit, MaskStrategy(), pvocab, t=2)
    ]
    training_path = out / "memlib0_training.jsonl"
    export_training(library_prompts, training_path)

    all_prompts = [
        p for unit in units for p in gen_prompts(unit, MaskStrategy(), pvocab, t=2)
    ]
    full_path = out / "full_training.jsonl"
    export_training(all_prompts, full_path)
    pool = read_training_file(full_path)
    assert len(pool) >= EVAL_POINTS
    eval_points = random.Random(EVAL_POINTS).sample(pool, EVAL_POINTS)
    return training_path, eval_points


@pytest.fixture(scope="module")
def tuned_model_dir(tmp_path_factory, svocab, exports):
    training_path, _ = exports
    records = read_training_file(training_path)
    config = ModelConfig(vocab_size=len(svocab), vocab_digest=svocab.digest)
    model = build_model(config)
    out = tmp_path_factory.mktemp("checkpoints") / "tuned"
    finetune(model, records, svocab, out, epochs=TUNING_EPOCHS, seed=0)
    return out


def span_recovery_hits(base_url: str, eval_points, client_vocab) -> int:
    """Count points whose whole gold span is the top-1 token at every position."""
    backend = RemoteBackend(base_url=base_url, vocab=client_vocab)
    hits = 0
    for record in eval_points:
        positions = sorted(record.labels)
        distributions = backend.score(
            ScoreRequest(
                tokens=record.tokens,
                mask_positions=tuple(positions),
                top_k=1,
            )
        )
        hits += all(
            dist[0][0] == record.labels[pos]
            for dist, pos in zip(distributions, positions)
        )
    return hits


def test_finetuning_strictly_improves_span_recovery(
    live_base_server, tuned_model_dir, vocab_path, exports
):
    _, eval_points = exports
    assert len(eval_points) == EVAL_POINTS
    client_vocab = Vocab.from_file(vocab_path)

    untuned_hits = span_recovery_hits(
        live_base_server.base_url, eval_points, client_vocab
    )
    tuned_state = make_state(tuned_model_dir, vocab_path)
    with LiveServer(create_app(tuned_state)) as tuned_live:
        tuned_hits = span_recovery_hits(
            tuned_live.base_url, eval_points, client_vocab
        )

    assert tuned_hits > untuned_hits
