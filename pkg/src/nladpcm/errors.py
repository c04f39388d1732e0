"""Exception hierarchy shared by all codec modules."""


class NladpcmError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(NladpcmError):
    """Invalid or inconsistent configuration value."""


class DegenerateFrameError(NladpcmError):
    """Frame carries no usable signal (zero energy or too short)."""


class BitstreamError(NladpcmError):
    """Malformed, truncated or tampered bitstream.

    ``byte_offset`` points at the first byte that failed validation,
    or -1 when the failure is not tied to a single position.
    """

    def __init__(self, message: str, byte_offset: int = -1):
        super().__init__(message)
        self.byte_offset = byte_offset


class NumericError(NladpcmError):
    """Non-finite sample or irrecoverable numerical failure."""
