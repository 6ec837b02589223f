"""Vocabulary loading with digest-based parity checks.

The vocabulary is the client's plain-text file, one token per line, used
verbatim; token ids are line numbers. The SHA-256 digest of the raw file
bytes identifies the vocabulary, and models refuse to serve against a file
whose digest differs from the one they were built with.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from hashlib import sha256
from pathlib import Path

from mlm_sidecar.errors import VocabError

PAD_TOKEN = "[PAD]"
UNK_TOKEN = "[UNK]"
CLS_TOKEN = "[CLS]"
SEP_TOKEN = "[SEP]"
MASK_TOKEN = "[MASK]"

REQUIRED_SPECIALS = (PAD_TOKEN, UNK_TOKEN, CLS_TOKEN, SEP_TOKEN, MASK_TOKEN)


@dataclass(frozen=True)
class SidecarVocab:
    """An ordered token list plus the digest of the file it came from."""

    tokens: tuple[str, ...]
    digest: str
    path: Path
    token_to_id: dict[str, int] = field(default_factory=dict, repr=False)

    def __post_init__(self) -> None:
        if not self.token_to_id:
            object.__setattr__(
                self, "token_to_id", {t: i for i, t in enumerate(self.tokens)}
            )

    def __len__(self) -> int:
        return len(self.tokens)

    @property
    def pad_id(self) -> int:
        return self.token_to_id[PAD_TOKEN]

    @property
    def mask_id(self) -> int:
        return self.token_to_id[MASK_TOKEN]


def load_vocab(path: str | Path) -> SidecarVocab:
    """Read a one-token-per-line vocabulary file and hash its bytes."""
    path = Path(path)
    if not path.is_file():
        raise VocabError(f"vocabulary file {path} does not exist")
    data = path.read_bytes()
    tokens = tuple(data.decode("utf-8").splitlines())
    if not tokens:
        raise VocabError(f"vocabulary file {path} is empty")
    seen = set()
    for lineno, token in enumerate(tokens, start=1):
        if not token:
            raise VocabError(f"{path}:{lineno}: empty token")
        if token in seen:
            raise VocabError(f"{path}:{lineno}: duplicate token {token!r}")
        seen.add(token)
    missing = [s for s in REQUIRED_SPECIALS if s not in seen]
    if missing:
        raise VocabError(f"{path}: missing special tokens {missing}")
    return SidecarVocab(tokens=tokens, digest=sha256(data).hexdigest(), path=path)


def check_parity(vocab: SidecarVocab, expected_digest: str) -> None:
    """Fail fast when the served vocabulary differs from the model's."""
    if vocab.digest != expected_digest:
        raise VocabError(
            f"vocabulary digest mismatch: file {vocab.path} has "
            f"{vocab.digest}, model was built with {expected_digest}"
        )
