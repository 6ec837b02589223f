"""Shared fixtures: the client pipeline's vocabulary, tiny models, servers.

The sidecar's contract partner keeps its fixture corpus and vocabulary two
directories up; these tests reuse them so both packages exercise the same
wire artifacts. A micro vocabulary and a micro model keep unit tests fast;
session-scoped checkpoints avoid rebuilding per test.
"""

from __future__ import annotations

import threading
import time
from pathlib import Path

import pytest
import uvicorn

from mlm_sidecar.model import ModelConfig, build_model, save_model
from mlm_sidecar.server import ServeConfig, ServerState, create_app
from mlm_sidecar.vocab import load_vocab

SIDECAR_ROOT = Path(__file__).resolve().parent.parent
PRIMARY_FIXTURES = SIDECAR_ROOT.parent / "tests" / "fixtures"
SIDECAR_FIXTURES = SIDECAR_ROOT / "tests" / "fixtures"

MICRO_TOKENS = (
    "[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]",
    ".", "=", "(", ")", ";",
    "java", "util", "List", "x", "y", "f", "new",
)


@pytest.fixture(scope="session")
def primary_fixtures() -> Path:
    return PRIMARY_FIXTURES


@pytest.fixture(scope="session")
def sidecar_fixtures() -> Path:
    return SIDECAR_FIXTURES


@pytest.fixture(scope="session")
def vocab_path(primary_fixtures) -> Path:
    return primary_fixtures / "vocab.txt"


@pytest.fixture(scope="session")
def svocab(vocab_path):
    return load_vocab(vocab_path)


@pytest.fixture(scope="session")
def micro_vocab_path(tmp_path_factory) -> Path:
    path = tmp_path_factory.mktemp("vocab") / "micro_vocab.txt"
    path.write_text("".join(t + "\n" for t in MICRO_TOKENS), encoding="utf-8")
    return path


@pytest.fixture(scope="session")
def micro_vocab(micro_vocab_path):
    return load_vocab(micro_vocab_path)


def micro_config(vocab, window: int = 16, seed: int = 0) -> ModelConfig:
    return ModelConfig(
        vocab_size=len(vocab), vocab_digest=vocab.digest,
        hidden=8, layers=1, heads=2, feed_forward=16, window=window, seed=seed,
    )


@pytest.fixture(scope="session")
def micro_model(micro_vocab):
    return build_model(micro_config(micro_vocab))


@pytest.fixture(scope="session")
def base_model_dir(tmp_path_factory, svocab) -> Path:
    """A seed-0 default-shape checkpoint over the shared fixture vocabulary."""
    out = tmp_path_factory.mktemp("checkpoints") / "base"
    config = ModelConfig(vocab_size=len(svocab), vocab_digest=svocab.digest)
    save_model(build_model(config), out)
    return out


def make_state(model_dir: Path, vocab_path: Path, **overrides) -> ServerState:
    """Build loaded server state for in-process (TestClient) tests."""
    config = ServeConfig(
        model_dir=str(model_dir), vocab_path=str(vocab_path), **overrides
    )
    state = ServerState(config, load_vocab(vocab_path))
    state.load()
    return state


class LiveServer:
    """Run the app on a real localhost socket for wire-level clients."""

    def __init__(self, app) -> None:
        config = uvicorn.Config(
            app, host="127.0.0.1", port=0, log_level="error", access_log=False
        )
        self.server = uvicorn.Server(config)
        self.thread = threading.Thread(target=self.server.run, daemon=True)
        self.base_url = ""

    def __enter__(self) -> "LiveServer":
        self.thread.start()
        deadline = time.monotonic() + 10
        while not self.server.started:
            if time.monotonic() > deadline:
                raise RuntimeError("server did not start within 10 s")
            time.sleep(0.01)
        port = self.server.servers[0].sockets[0].getsockname()[1]
        self.base_url = f"http://127.0.0.1:{port}"
        return self

    def __exit__(self, *exc) -> None:
        self.server.should_exit = True
        self.thread.join(timeout=10)


@pytest.fixture(scope="session")
def live_base_server(base_model_dir, vocab_path):
    """The base checkpoint served over a real socket, shared per session."""
    state = make_state(base_model_dir, vocab_path)
    with LiveServer(create_app(state)) as live:
        yield live
