"""A small transformer masked language model with reproducible checkpoints.

The model is a standard BERT-shaped encoder (token plus position embeddings,
a stack of transformer layers, a linear head over the vocabulary) sized for
desk-scale corpora. Weights are initialized from a fixed seed so that
building the same configuration twice yields identical checkpoints, and all
dropout is disabled so that fine-tuning is reproducible as well.

A checkpoint is a directory holding ``config.json`` (the model shape, the
seed, and the vocabulary digest) and ``weights.pt`` (the state dict).
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from pathlib import Path

import torch
from torch import nn

from mlm_sidecar.errors import ModelError

FORMAT_VERSION = 1

CONFIG_FILE = "config.json"
WEIGHTS_FILE = "weights.pt"


@dataclass(frozen=True)
class ModelConfig:
    """Shape and provenance of one checkpoint."""

    vocab_size: int
    vocab_digest: str
    hidden: int = 64
    layers: int = 2
    heads: int = 4
    feed_forward: int = 128
    window: int = 512
    seed: int = 0
    format_version: int = FORMAT_VERSION

    def __post_init__(self) -> None:
        if self.vocab_size < 1:
            raise ModelError("vocab_size must be >= 1")
        if self.hidden < 1 or self.hidden % max(self.heads, 1) != 0:
            raise ModelError("hidden must be a positive multiple of heads")
        if self.layers < 1 or self.heads < 1 or self.feed_forward < 1:
            raise ModelError("layers, heads, and feed_forward must be >= 1")
        if self.window < 1:
            raise ModelError("window must be >= 1")
        if len(self.vocab_digest) != 64:
            raise ModelError("vocab_digest must be a sha256 hex string")


class MaskedLm(nn.Module):
    """Token + position embeddings, encoder stack, vocabulary head."""

    def __init__(self, config: ModelConfig) -> None:
        super().__init__()
        self.config = config
        self.token_embedding = nn.Embedding(config.vocab_size, config.hidden)
        self.position_embedding = nn.Embedding(config.window, config.hidden)
        layer = nn.TransformerEncoderLayer(
            d_model=config.hidden,
            nhead=config.heads,
            dim_feedforward=config.feed_forward,
            dropout=0.0,
            activation="gelu",
            batch_first=True,
        )
        self.encoder = nn.TransformerEncoder(
            layer, num_layers=config.layers, enable_nested_tensor=False
        )
        self.norm = nn.LayerNorm(config.hidden)
        self.head = nn.Linear(config.hidden, config.vocab_size)

    def forward(
        self, ids: torch.Tensor, attention_mask: torch.Tensor | None = None
    ) -> torch.Tensor:
        """Return logits of shape (batch, length, vocab_size)."""
        positions = torch.arange(ids.shape[1], device=ids.device)
        x = self.token_embedding(ids) + self.position_embedding(positions)[None, :, :]
        padding_mask = None
        if attention_mask is not None:
            padding_mask = ~attention_mask.bool()
        x = self.encoder(x, src_key_padding_mask=padding_mask)
        return self.head(self.norm(x))


def build_model(config: ModelConfig) -> MaskedLm:
    """Initialize a model from the configuration's seed, deterministically."""
    torch.manual_seed(config.seed)
    model = MaskedLm(config)
    model.eval()
    return model


def save_model(model: MaskedLm, out_dir: str | Path) -> Path:
    """Write config.json and weights.pt under ``out_dir``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / CONFIG_FILE).write_text(
        json.dumps(dataclasses.asdict(model.config), indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )
    torch.save(model.state_dict(), out_dir / WEIGHTS_FILE)
    return out_dir


def load_model(model_dir: str | Path) -> MaskedLm:
    """Reconstruct a model from a checkpoint directory, in eval mode."""
    model_dir = Path(model_dir)
    config_path = model_dir / CONFIG_FILE
    weights_path = model_dir / WEIGHTS_FILE
    if not config_path.is_file() or not weights_path.is_file():
        raise ModelError(f"{model_dir} is not a checkpoint directory")
    try:
        payload = json.loads(config_path.read_text(encoding="utf-8"))
        config = ModelConfig(**payload)
    except (json.JSONDecodeError, TypeError) as exc:
        raise ModelError(f"bad {config_path}: {exc}") from None
    if config.format_version != FORMAT_VERSION:
        raise ModelError(
            f"unsupported checkpoint format {config.format_version} "
            f"(expected {FORMAT_VERSION})"
        )
    model = MaskedLm(config)
    try:
        state = torch.load(weights_path, map_location="cpu", weights_only=True)
        model.load_state_dict(state)
    except (RuntimeError, ValueError) as exc:
        raise ModelError(f"bad {weights_path}: {exc}") from None
    model.eval()
    return model
