#!/usr/bin/env python3
"""Regenerate the committed wire-parity fixtures.

Produces, under tests/fixtures/:
  requests.jsonl          50 score requests drawn from the client pipeline's
                          training export over the shared fixture corpus
  golden_responses.jsonl  the literal response body each request gets from a
                          freshly built seed-0 checkpoint, one line per request

Requests are the first 50 exported records, with top_k cycling through
1, 3, 5, 10. Responses are captured through the HTTP app itself so the
golden bytes are exactly what the server sends. Rerunning this script on
the same torch version must be byte-stable.
"""

from __future__ import annotations

import json
import sys
import tempfile
from pathlib import Path

from fastapi.testclient import TestClient

from fqninfer.corpus import load_corpus
from fqninfer.promptgen import MaskStrategy, export_training, gen_prompts
from fqninfer.tokenizer import Vocab

from mlm_sidecar.model import ModelConfig, build_model, save_model
from mlm_sidecar.server import ServeConfig, ServerState, create_app
from mlm_sidecar.training import read_training_file
from mlm_sidecar.vocab import load_vocab

SIDECAR_ROOT = Path(__file__).resolve().parent.parent
PRIMARY_FIXTURES = SIDECAR_ROOT.parent / "tests" / "fixtures"
OUT_DIR = SIDECAR_ROOT / "tests" / "fixtures"

TOP_KS = (1, 3, 5, 10)
REQUEST_COUNT = 50


def main() -> int:
    vocab_path = PRIMARY_FIXTURES / "vocab.txt"
    units = load_corpus(PRIMARY_FIXTURES / "memorization.jsonl")
    pvocab = Vocab.from_file(vocab_path)
    prompts = [
        p for u in units for p in gen_prompts(u, MaskStrategy(), pvocab, t=2)
    ]
    with tempfile.TemporaryDirectory() as tmp:
        export = Path(tmp) / "training.jsonl"
        export_training(prompts, export)
        records = read_training_file(export)

        requests = []
        for i, record in enumerate(records[:REQUEST_COUNT]):
            requests.append(
                {
                    "tokens": list(record.tokens),
                    "mask_positions": sorted(record.labels),
                    "top_k": TOP_KS[i % len(TOP_KS)],
                }
            )
        if len(requests) != REQUEST_COUNT:
            print(f"expected {REQUEST_COUNT} records, got {len(requests)}")
            return 1

        svocab = load_vocab(vocab_path)
        model_dir = Path(tmp) / "model"
        config = ModelConfig(vocab_size=len(svocab), vocab_digest=svocab.digest)
        save_model(build_model(config), model_dir)

        serve = ServeConfig(model_dir=str(model_dir), vocab_path=str(vocab_path))
        state = ServerState(serve, svocab)
        app = create_app(state)
        state.load()

        OUT_DIR.mkdir(parents=True, exist_ok=True)
        with TestClient(app) as client:
            request_lines = []
            response_lines = []
            for req in requests:
                body = json.dumps(req, separators=(",", ":"), sort_keys=True)
                resp = client.post("/v1/score", content=body.encode("utf-8"))
                if resp.status_code != 200:
                    print(f"request failed: {resp.status_code} {resp.text}")
                    return 1
                request_lines.append(body + "\n")
                response_lines.append(resp.content.decode("utf-8") + "\n")
        (OUT_DIR / "requests.jsonl").write_text("".join(request_lines))
        (OUT_DIR / "golden_responses.jsonl").write_text("".join(response_lines))
    print(f"wrote {REQUEST_COUNT} request/response pairs to {OUT_DIR}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
