"""Exception types shared across the toolkit."""


class ConfitError(Exception):
    """Base class for all toolkit errors."""


class ParseError(ConfitError):
    """A dataset file could not be parsed; carries the offending line number."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class ValidationError(ConfitError):
    """Input data violates a documented contract (duplicate ids, unknown labels, ...)."""


class ProviderError(ConfitError):
    """A paraphrase provider failed to return usable text."""


class AugmentationError(ConfitError):
    """Dataset expansion failed; carries the class and source example involved."""

    def __init__(self, message: str, label: str | None = None, source_id: str | None = None):
        super().__init__(message)
        self.label = label
        self.source_id = source_id


class TrainingError(ConfitError):
    """Training diverged or produced non-finite values."""


class ArtifactError(ConfitError):
    """A model artifact file is unreadable or has the wrong format/version."""
