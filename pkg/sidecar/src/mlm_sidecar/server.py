"""The HTTP scoring service.

Endpoints:

- ``POST /v1/score``: fill-mask scoring per the wire protocol. The body is
  ``{"tokens": [...], "mask_positions": [...], "top_k": K}`` and the reply
  is ``{"distributions": [[{"token": ..., "p": ...}, ...], ...]}`` aligned
  with the requested positions. Malformed requests get 400, requests longer
  than the model window get 413, and 503 is returned until the model has
  loaded.
- ``GET /v1/health``: ``{"status": "ok", "window": N}`` once ready.
- ``GET /v1/vocab``: the vocabulary file itself, one token per line.

Responses are serialized with a fixed compact JSON encoding so that
identical requests against the same checkpoint produce byte-identical
bodies. The model runs under a lock, so concurrent requests are scored
sequentially and responses never interleave.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass
from pathlib import Path

from fastapi import FastAPI, Request, Response

from mlm_sidecar.errors import ModelError, RequestError, VocabError
from mlm_sidecar.model import MaskedLm, load_model
from mlm_sidecar.scoring import score, validate_request
from mlm_sidecar.vocab import SidecarVocab, check_parity, load_vocab


@dataclass
class ServeConfig:
    """Settings for one serving process."""

    model_dir: str
    vocab_path: str
    host: str = "127.0.0.1"
    port: int = 8756
    device: str = "cpu"
    top_k_cap: int = 50
    max_batch: int = 8

    def __post_init__(self) -> None:
        if self.top_k_cap < 1:
            raise ModelError("top_k_cap must be >= 1")
        if self.max_batch < 1:
            raise ModelError("max_batch must be >= 1")
        if self.device not in ("cpu", "cuda"):
            raise ModelError(f"unsupported device {self.device!r}")
        if not 0 < self.port < 65536:
            raise ModelError(f"port {self.port} out of range")


class ServerState:
    """Everything the endpoints share: vocab, config, and the live model."""

    def __init__(self, config: ServeConfig, vocab: SidecarVocab) -> None:
        self.config = config
        self.vocab = vocab
        self.model: MaskedLm | None = None
        self.model_lock = threading.Lock()
        self.inflight = threading.Semaphore(config.max_batch)

    def load(self) -> None:
        """Load the checkpoint and verify vocabulary parity."""
        model = load_model(self.config.model_dir)
        check_parity(self.vocab, model.config.vocab_digest)
        self.model = model


def _json_response(payload: dict, status: int = 200) -> Response:
    body = json.dumps(payload, separators=(",", ":"), sort_keys=True)
    return Response(
        content=body.encode("utf-8"), status_code=status,
        media_type="application/json",
    )


def create_app(state: ServerState) -> FastAPI:
    """Build the FastAPI application around shared server state."""
    app = FastAPI(title="mlm-sidecar", docs_url=None, redoc_url=None)

    @app.get("/v1/health")
    def health() -> Response:
        if state.model is None:
            return _json_response({"error": "model not ready"}, status=503)
        return _json_response(
            {"status": "ok", "window": state.model.config.window}
        )

    @app.get("/v1/vocab")
    def vocab_file() -> Response:
        data = Path(state.vocab.path).read_bytes()
        return Response(content=data, media_type="text/plain; charset=utf-8")

    @app.post("/v1/score")
    async def score_masks(request: Request) -> Response:
        if state.model is None:
            return _json_response({"error": "model not ready"}, status=503)
        raw = await request.body()
        try:
            payload = json.loads(raw)
        except json.JSONDecodeError as exc:
            return _json_response({"error": f"bad JSON: {exc}"}, status=400)
        try:
            tokens, positions, top_k = validate_request(
                payload, state.vocab, state.model.config.window
            )
        except RequestError as exc:
            return _json_response({"error": str(exc)}, status=exc.status)
        with state.inflight:
            with state.model_lock:
                distributions = score(
                    state.model, state.vocab, tokens, positions,
                    top_k, state.config.top_k_cap,
                )
        return _json_response({"distributions": distributions})

    return app


def build_server(config: ServeConfig) -> tuple[FastAPI, ServerState]:
    """Load the vocabulary, create the app, and load the model.

    Raises :class:`VocabError` on digest mismatch so the CLI can exit
    before binding the port.
    """
    vocab = load_vocab(config.vocab_path)
    state = ServerState(config, vocab)
    app = create_app(state)
    state.load()
    return app, state


__all__ = [
    "ServeConfig",
    "ServerState",
    "build_server",
    "create_app",
    "ModelError",
    "VocabError",
]
