"""Exception types shared across the sidecar."""


class SidecarError(Exception):
    """Base class for sidecar failures."""


class VocabError(SidecarError):
    """The vocabulary file is malformed or does not match the model."""


class ModelError(SidecarError):
    """A model checkpoint cannot be built, saved, or loaded."""


class TrainingError(SidecarError):
    """Fine-tuning cannot proceed (bad file, bad hyperparameters)."""


class RequestError(SidecarError):
    """A scoring request violates the wire protocol.

    ``status`` is the HTTP status the server must answer with: 400 for a
    malformed request, 413 when the token sequence exceeds the model window.
    """

    def __init__(self, message: str, status: int = 400) -> None:
        super().__init__(message)
        self.status = status
