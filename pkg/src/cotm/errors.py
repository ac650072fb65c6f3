"""Exception types shared across the package."""


class CotmError(Exception):
    """Base class for all library errors."""


class ConfigError(CotmError, ValueError):
    """Invalid configuration value or combination."""


class ShapeError(CotmError, ValueError):
    """Input does not match the shape the model or dataset expects."""


class InvariantError(CotmError, RuntimeError):
    """A structural invariant of the model state was violated."""


class FormatError(CotmError, ValueError):
    """Malformed file content. `offset` is the byte position of the problem."""

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class DivergenceError(CotmError, RuntimeError):
    """The optimized engine and the reference oracle disagreed.

    `detail` holds the offending coordinates: seed, instance, step, the
    name of the diverging matrix and the first differing index.
    """

    def __init__(self, message, detail=None):
        super().__init__(message)
        self.detail = detail or {}
