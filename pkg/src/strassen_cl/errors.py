"""Exception types raised across the package."""


class StrassenCLError(Exception):
    """Base class for all package errors."""


class SizeError(StrassenCLError, ValueError):
    """Matrix dimension outside the supported range."""


class DimensionError(StrassenCLError, ValueError):
    """Arrays whose shapes do not fit together."""


class ConditioningError(StrassenCLError, ValueError):
    """A transform matrix is singular or too badly conditioned."""


class NormalizationError(StrassenCLError, ValueError):
    """An input vector that should have unit norm does not."""


class InputError(StrassenCLError, ValueError):
    """A training item violates its invariants."""


class WeightFileError(StrassenCLError, ValueError):
    """A weight file could not be parsed.

    ``line`` and ``field`` locate the problem when known.
    """

    def __init__(self, message, line=None, field=None):
        self.line = line
        self.field = field
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field!r}")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)
