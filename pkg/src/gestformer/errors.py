"""Exception hierarchy shared by the library and the CLI."""


class GestFormerError(Exception):
    """Base class for all library errors."""


class DimensionError(GestFormerError, ValueError):
    """Operand shapes are incompatible."""


class ConfigError(GestFormerError, ValueError):
    """Invalid configuration value or unknown configuration key."""


class ContractError(GestFormerError, ValueError):
    """A call violated an operation's precondition (e.g. backward on a non-scalar)."""


class InputError(GestFormerError, ValueError):
    """Bad user-supplied data: out-of-range labels, misaligned files, empty inputs."""


class FormatError(GestFormerError):
    """A binary file does not follow the expected layout.

    ``offset`` is the byte position at which the problem was detected.
    """

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class LengthError(FormatError):
    """A binary payload is shorter or longer than its header declares."""

    def __init__(self, what, expected, actual, offset=None):
        super().__init__(
            f"{what}: expected {expected} bytes, got {actual}", offset=offset
        )
        self.expected = expected
        self.actual = actual


class NumericalError(GestFormerError):
    """Training or gradient checking produced a non-finite or out-of-tolerance value."""
