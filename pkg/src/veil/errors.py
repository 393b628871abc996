"""Exception types shared across the toolkit."""


class VeilError(Exception):
    """Base class for all toolkit errors."""


class CorpusError(VeilError):
    """Malformed corpus file, record, or impossible split."""


class FeatureError(VeilError):
    """Feature extraction failure (e.g. empty effective vocabulary)."""


class EmbeddingError(VeilError):
    """Malformed embedding, lexicon, or POS file."""


class ModelError(VeilError):
    """Training or prediction failure."""


class ModelFormatError(ModelError):
    """Corrupt or version-incompatible model file."""


class PlanError(VeilError):
    """Invalid experiment plan. Carries the offending key path."""

    def __init__(self, message, key=None):
        super().__init__(message if key is None else f"{message} (at {key})")
        self.key = key


class EncoderError(VeilError):
    """Base class for external-encoder failures."""


class EncoderConnectionError(EncoderError):
    """The encoder endpoint could not be reached."""


class EncoderTimeoutError(EncoderError):
    """The encoder did not answer within the configured timeout."""


class EncoderProtocolError(EncoderError):
    """The encoder answered with a malformed or unexpected payload."""
