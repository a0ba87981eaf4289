"""Exception hierarchy shared across the pipeline."""


class KeyframeError(Exception):
    """Base class for all errors raised by this package."""


class ManifestError(KeyframeError):
    """Manifest could not be parsed; message carries the offending line number."""


class QueryError(KeyframeError):
    """A text query could not be built from a manifest entry."""


class DecodeError(KeyframeError):
    """Video could not be probed or decoded."""

    def __init__(self, path, detail: str):
        super().__init__(f"{path}: {detail}")
        self.path = str(path)
        self.detail = detail


class EncodeError(KeyframeError):
    """External encoder failed to produce a video."""


class WriteError(KeyframeError):
    """Output artifacts could not be written."""


class ProviderError(KeyframeError):
    """Embedding provider failed.

    ``retryable`` distinguishes transient transport problems (timeouts,
    503 overload) from contract violations such as a dimension mismatch.
    """

    def __init__(self, message: str, *, retryable: bool = False):
        super().__init__(message)
        self.retryable = retryable


class ScoreError(KeyframeError):
    """Similarity score could not be computed (dim mismatch, zero vector)."""


class MetricError(KeyframeError):
    """A run metric is undefined for the given inputs."""


class UnsupportedStrategyError(KeyframeError):
    """Requested selector strategy is a reserved, unimplemented slot."""


class ConfigError(KeyframeError):
    """Run configuration is invalid or the run cannot start."""
