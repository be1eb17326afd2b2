"""Exception hierarchy shared by the library and the CLI."""


class CSLDSError(Exception):
    """Base class for all errors raised by cslds."""

    exit_code = 3


class DimensionError(CSLDSError, ValueError):
    """Array shapes or sizes are inconsistent."""


class NumericalError(CSLDSError, ArithmeticError):
    """A numerical precondition failed (rank deficiency, undefined SNR, ...).

    `reason` is a short machine-readable tag such as ``"undefined_snr"``.
    """

    def __init__(self, reason, message=None):
        super().__init__(message or reason)
        self.reason = reason


class ConfigError(CSLDSError):
    """Malformed or incomplete run configuration."""

    exit_code = 1


class FormatError(CSLDSError):
    """A file does not follow the expected on-disk layout."""

    exit_code = 2
