"""Fine-tuning on exported full-span prompt files.

The training file is the client pipeline's export: JSON lines of
``{"tokens": [...], "labels": {position: token}}`` where the tokens already
contain ``[MASK]`` at every labeled position. Masking happened upstream and
is never redone here; the loss is cross-entropy between the model's output
and the ground-truth token at exactly the labeled positions, every other
position being ignored.

Each epoch ends with a checkpoint under ``checkpoint-epoch-N/`` and the run
ends with the tuned model in the output directory root plus a
``loss_log.json`` recording the initial full-dataset loss, per-batch
training losses, and per-epoch means.
"""

from __future__ import annotations

import gzip
import json
import random
from dataclasses import dataclass
from pathlib import Path

import torch
from torch import nn

from mlm_sidecar.errors import TrainingError
from mlm_sidecar.model import MaskedLm, save_model
from mlm_sidecar.vocab import MASK_TOKEN, SidecarVocab

IGNORE_INDEX = -100

LOSS_LOG_FILE = "loss_log.json"


@dataclass(frozen=True)
class TrainingRecord:
    """One exported prompt: masked tokens plus position-to-token labels."""

    tokens: tuple[str, ...]
    labels: dict[int, str]


def read_training_file(path: str | Path) -> list[TrainingRecord]:
    """Parse the exported training file (``.gz`` handled transparently)."""
    path = Path(path)
    if not path.is_file():
        raise TrainingError(f"training file {path} does not exist")
    opener = gzip.open if path.suffix == ".gz" else open
    records = []
    with opener(path, "rt", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                payload = json.loads(line)
                tokens = tuple(payload["tokens"])
                labels = {int(k): v for k, v in payload["labels"].items()}
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise TrainingError(f"{path}:{lineno}: bad record: {exc}") from None
            if not labels:
                raise TrainingError(f"{path}:{lineno}: record has no labels")
            for pos, token in labels.items():
                if not 0 <= pos < len(tokens):
                    raise TrainingError(
                        f"{path}:{lineno}: label position {pos} outside tokens"
                    )
                if tokens[pos] != MASK_TOKEN:
                    raise TrainingError(
                        f"{path}:{lineno}: position {pos} holds "
                        f"{tokens[pos]!r}; masking must happen upstream"
                    )
                if not isinstance(token, str):
                    raise TrainingError(f"{path}:{lineno}: label must be a string")
            records.append(TrainingRecord(tokens=tokens, labels=labels))
    if not records:
        raise TrainingError(f"training file {path} has no records")
    return records


def _check_records(records: list[TrainingRecord], vocab: SidecarVocab, window: int):
    for record in records:
        if len(record.tokens) > window:
            raise TrainingError(
                f"record of {len(record.tokens)} tokens exceeds window {window}"
            )
        for token in record.tokens:
            if token not in vocab.token_to_id:
                raise TrainingError(f"token {token!r} not in the vocabulary")
        for token in record.labels.values():
            if token not in vocab.token_to_id:
                raise TrainingError(f"label token {token!r} not in the vocabulary")


def _encode_batch(
    batch: list[TrainingRecord], vocab: SidecarVocab
) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
    width = max(len(r.tokens) for r in batch)
    ids = torch.full((len(batch), width), vocab.pad_id, dtype=torch.long)
    attention = torch.zeros((len(batch), width), dtype=torch.long)
    targets = torch.full((len(batch), width), IGNORE_INDEX, dtype=torch.long)
    for row, record in enumerate(batch):
        for col, token in enumerate(record.tokens):
            ids[row, col] = vocab.token_to_id[token]
        attention[row, : len(record.tokens)] = 1
        for pos, token in record.labels.items():
            targets[row, pos] = vocab.token_to_id[token]
    return ids, attention, targets


def dataset_loss(
    model: MaskedLm, records: list[TrainingRecord], vocab: SidecarVocab
) -> float:
    """Mean masked-token cross-entropy over the whole record list."""
    criterion = nn.CrossEntropyLoss(ignore_index=IGNORE_INDEX, reduction="sum")
    total = 0.0
    count = 0
    model.eval()
    with torch.no_grad():
        for start in range(0, len(records), 8):
            batch = records[start : start + 8]
            ids, attention, targets = _encode_batch(batch, vocab)
            logits = model(ids, attention)
            total += criterion(
                logits.reshape(-1, logits.shape[-1]), targets.reshape(-1)
            ).item()
            count += int((targets != IGNORE_INDEX).sum())
    return total / count


def finetune(
    model: MaskedLm,
    records: list[TrainingRecord],
    vocab: SidecarVocab,
    out_dir: str | Path,
    *,
    epochs: int = 3,
    lr: float = 5e-3,
    batch_size: int = 2,
    seed: int = 0,
) -> dict:
    """Tune the model in place and write checkpoints plus the loss log.

    Returns the loss log dictionary that was written to ``loss_log.json``.
    """
    if epochs < 1:
        raise TrainingError("epochs must be >= 1")
    if lr <= 0:
        raise TrainingError("lr must be > 0")
    if batch_size < 1:
        raise TrainingError("batch_size must be >= 1")
    if model.config.vocab_digest != vocab.digest:
        raise TrainingError(
            "vocabulary digest mismatch between the model and the vocab file"
        )
    _check_records(records, vocab, model.config.window)

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = random.Random(seed)
    torch.manual_seed(seed)
    optimizer = torch.optim.Adam(model.parameters(), lr=lr)
    criterion = nn.CrossEntropyLoss(ignore_index=IGNORE_INDEX)

    log: dict = {
        "records": len(records),
        "epochs": [],
        "initial_loss": dataset_loss(model, records, vocab),
        "lr": lr,
        "batch_size": batch_size,
        "seed": seed,
    }
    order = list(range(len(records)))
    for epoch in range(1, epochs + 1):
        rng.shuffle(order)
        model.train()
        batch_losses = []
        for start in range(0, len(order), batch_size):
            batch = [records[i] for i in order[start : start + batch_size]]
            ids, attention, targets = _encode_batch(batch, vocab)
            optimizer.zero_grad()
            logits = model(ids, attention)
            loss = criterion(
                logits.reshape(-1, logits.shape[-1]), targets.reshape(-1)
            )
            loss.backward()
            optimizer.step()
            batch_losses.append(loss.item())
        model.eval()
        epoch_loss = dataset_loss(model, records, vocab)
        log["epochs"].append(
            {
                "epoch": epoch,
                "batch_losses": batch_losses,
                "mean_batch_loss": sum(batch_losses) / len(batch_losses),
                "dataset_loss": epoch_loss,
            }
        )
        save_model(model, out_dir / f"checkpoint-epoch-{epoch}")

    save_model(model, out_dir)
    (out_dir / LOSS_LOG_FILE).write_text(
        json.dumps(log, indent=2) + "\n", encoding="utf-8"
    )
    return log
