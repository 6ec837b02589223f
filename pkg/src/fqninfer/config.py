"""Run configuration shared by every CLI subcommand.

Values resolve in precedence order: command-line flags, then FQNINFER_*
environment variables, then the JSON config file, then built-in defaults.
The config digest feeds the run manifest so outputs can be traced back to
the exact settings that produced them.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

from fqninfer.errors import ConfigError

BACKEND_KINDS = ("ngram", "remote", "scripted")


@dataclass
class RunConfig:
    """Every knob of the pipeline with its default value."""

    t: int = 2
    window: int = 512
    mask_strategy: str = "full_span"
    mask_ratio: float = 0.15
    min_len: int = 3
    max_len: int = 69
    aggregate: str = "arithmetic"
    setting: str = "leave_one_out"
    backend: str = "ngram"
    model_path: str | None = None
    base_url: str | None = None
    script_path: str | None = None
    vocab_path: str | None = None
    seed: int = 0
    theta: float = 0.35
    top_k: int = 10
    jobs: int = 1
    order: int = 4
    alpha: float = 1.0

    def validate(self) -> None:
        if self.t < 0:
            raise ConfigError("t must be >= 0")
        if self.window < 1:
            raise ConfigError("window must be >= 1")
        if self.mask_strategy not in ("full_span", "random"):
            raise ConfigError(f"unknown mask strategy {self.mask_strategy!r}")
        if not 0.0 < self.mask_ratio <= 1.0:
            raise ConfigError("mask_ratio must be in (0, 1]")
        if not 1 <= self.min_len <= self.max_len:
            raise ConfigError("need 1 <= min_len <= max_len")
        if self.aggregate not in ("arithmetic", "geometric"):
            raise ConfigError(f"unknown aggregate {self.aggregate!r}")
        if self.setting not in ("leave_one_out", "all_unknown"):
            raise ConfigError(f"unknown prompt setting {self.setting!r}")
        if self.backend not in BACKEND_KINDS:
            raise ConfigError(
                f"backend must be one of {', '.join(BACKEND_KINDS)}, "
                f"got {self.backend!r}"
            )
        if not 0.0 < self.theta < 1.0:
            raise ConfigError("theta must be in (0, 1)")
        if self.top_k < 1:
            raise ConfigError("top_k must be >= 1")
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")
        if self.order < 1:
            raise ConfigError("order must be >= 1")
        if self.alpha <= 0:
            raise ConfigError("alpha must be > 0")
        for label in ("model_path", "script_path", "vocab_path"):
            value = getattr(self, label)
            if value is not None and not Path(value).exists():
                raise ConfigError(f"{label} {value!r} does not exist")

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        """Load a JSON config file; unknown keys are an error."""
        try:
            payload = json.loads(Path(path).read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
        if not isinstance(payload, dict):
            raise ConfigError(f"config {path} must be a JSON object")
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(payload) - known)
        if unknown:
            raise ConfigError(f"config {path} has unknown keys: {', '.join(unknown)}")
        try:
            config = cls(**payload)
            config.validate()
        except TypeError as exc:
            raise ConfigError(f"config {path}: {exc}") from None
        return config

    def merged(self, **overrides) -> "RunConfig":
        """A copy with every non-None override applied, then revalidated."""
        changes = {k: v for k, v in overrides.items() if v is not None}
        config = dataclasses.replace(self, **changes)
        config.validate()
        return config

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def digest(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()
