"""Exception types shared across the toolkit."""


class FqnInferError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(FqnInferError):
    """Run configuration failed validation."""


class MalformedRecord(FqnInferError):
    """A corpus, prompt, or training record has missing fields or bad types."""


class SpanOutOfBounds(FqnInferError):
    """An annotation span does not fit the text it points into."""


class OverlapError(FqnInferError):
    """Two annotations on the same unit overlap."""


class UnknownTokenPresent(FqnInferError):
    """A token sequence cannot be decoded because it contains the unknown token."""


class NoMaskableTokens(FqnInferError):
    """A focus line's annotations tokenize to zero maskable subtokens."""


class PointNotFound(FqnInferError):
    """An inference point does not match the unit it supposedly came from."""


class BackendUnavailable(FqnInferError):
    """The scoring backend cannot be reached or is not ready."""


class ProtocolError(FqnInferError):
    """The remote backend returned a malformed or schema-violating response."""


class VocabMismatch(FqnInferError):
    """Backend vocabulary disagrees with the local vocabulary."""


class EmptyCorpus(FqnInferError):
    """No training sequences were provided."""


class DecodeError(FqnInferError):
    """No decodable prediction exists for an inference point."""


class EmptyInput(FqnInferError):
    """A metric was called with no records."""


class EmptyReference(FqnInferError):
    """BLEU was called with an empty reference sequence."""


class EmptyPrompt(FqnInferError):
    """Prompt similarity was called with an empty token bag."""
