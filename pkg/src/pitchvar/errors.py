"""Exception types shared across the package."""


class PitchVarError(Exception):
    """Base class for package errors."""


class FormatError(PitchVarError, ValueError):
    """Malformed or inconsistent file or matrix data."""


class VersionError(FormatError):
    """File carries an unsupported format version."""


class NumericError(PitchVarError, FloatingPointError):
    """Non-finite value met during computation."""
