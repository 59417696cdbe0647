"""Exception types shared across the toolkit."""


class ToolkitError(Exception):
    """Base class for all toolkit errors."""


class ParseError(ToolkitError):
    """Malformed input file (carries filename/line context in the message)."""


class DomainError(ToolkitError):
    """A precondition on an operation's inputs was violated."""


class NoObjectFoundError(DomainError):
    """Background removal consumed (nearly) the whole image."""


class FormatError(ToolkitError):
    """A binary payload violates its declared layout."""


class BadMagicError(FormatError):
    """Container does not start with the expected magic bytes."""


class TruncatedError(FormatError):
    """Payload ends before the declared layout is complete."""


class UnknownVersionError(FormatError):
    """Container declares a format version this build cannot read."""


class ConflictError(ToolkitError):
    """An idempotency rule was violated (e.g. a repeated ranking submission)."""


class BackendError(ToolkitError):
    """A remote generative backend failed or returned garbage."""


class PipelineStageError(ToolkitError):
    """Wraps a failure with the name of the pipeline stage it occurred in."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"stage '{stage}': {cause}")
        self.stage = stage
        self.cause = cause
