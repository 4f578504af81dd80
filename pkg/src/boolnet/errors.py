"""Exception types shared across the package.

The CLI maps these onto process exit codes: config/usage -> 1,
data -> 2, numeric -> 3, verification -> 4.
"""


class BoolnetError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(BoolnetError):
    """Invalid configuration value, key, or combination."""


class DataError(BoolnetError):
    """Problem with an input dataset."""


class DataFormatError(DataError):
    """File does not match the expected container format."""


class TruncationError(DataFormatError):
    """File ended before the payload announced by its header."""


class ShapeError(BoolnetError):
    """Vector or image shape does not match the consuming component."""


class SerializationError(BoolnetError):
    """Malformed model or netlist container."""


class VersionError(SerializationError):
    """Container version is not supported by this build."""


class IntegrityError(SerializationError):
    """Container checksum does not match its payload."""


class NumericError(BoolnetError):
    """Non-finite value encountered during training or evaluation."""


class VerificationError(BoolnetError):
    """Cross-check between two evaluation routes disagreed."""
