class EnsembleFSError(Exception):
    """Base class for package errors."""


class DataError(EnsembleFSError, ValueError):
    """Bad input data: malformed CSV, schema mismatch, invalid parameters."""


class ConfigError(EnsembleFSError, ValueError):
    """Run configuration violates an invariant."""


class StageError(EnsembleFSError):
    """Wraps a failure with the pipeline stage it happened in."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"[{stage}] {cause}")
        self.stage = stage
        self.cause = cause
