"""Exception hierarchy shared across the package."""


class SdforgeError(Exception):
    """Base class for all package errors."""


class ManifestError(SdforgeError):
    """Bad acquisition manifest (parse failure, duplicate destination)."""


class MalformedRecordError(SdforgeError):
    """A structure-data block violates the format contract."""


class UnsupportedFormatError(MalformedRecordError):
    """Connection table is not V2000."""


class IndexFormatError(SdforgeError):
    """Persisted offset index is unreadable (bad magic, truncation)."""


class ModelFormatError(SdforgeError):
    """Persisted model file is unreadable (bad magic, truncation)."""


class ExtractionError(SdforgeError):
    """Seek/read failure while extracting planned records."""


class ConvergenceError(SdforgeError):
    """Iterative solver exhausted its iteration budget.

    The last iterate is attached so callers can inspect how far the
    solve progressed.
    """

    def __init__(self, message, last_iterate=None):
        super().__init__(message)
        self.last_iterate = last_iterate


class ConfigError(SdforgeError):
    """Invalid pipeline configuration."""


class PhaseError(SdforgeError):
    """A pipeline phase failed; upstream artifacts are preserved."""

    def __init__(self, phase, message):
        super().__init__(f"phase {phase!r} failed: {message}")
        self.phase = phase
