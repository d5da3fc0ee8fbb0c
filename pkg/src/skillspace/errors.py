"""Exception hierarchy.

Input/validation problems derive from :class:`InputError` (CLI exit code 2);
numerical failures derive from :class:`NumericalError` (CLI exit code 1).
"""


class SkillSpaceError(Exception):
    """Base class for all package errors."""


class InputError(SkillSpaceError, ValueError):
    """Malformed or inconsistent user input."""


class ParseError(InputError):
    def __init__(self, message, row=None, column=None, path=None):
        loc = []
        if path is not None:
            loc.append(str(path))
        if row is not None:
            loc.append(f"row {row}")
        if column is not None:
            loc.append(f"column {column}")
        prefix = f"{', '.join(loc)}: " if loc else ""
        super().__init__(prefix + message)
        self.row = row
        self.column = column
        self.path = path


class ValidationError(InputError):
    pass


class RangeError(InputError):
    pass


class MissingDataError(InputError):
    pass


class AlignmentError(InputError):
    """Identifiers of two objects do not line up."""


class UnderdeterminedError(InputError):
    """Fewer observations than unknowns."""


class DegenerateError(InputError):
    """Constant column, zero vector or similar degenerate input."""


class NumericalError(SkillSpaceError):
    pass


class ConditioningError(NumericalError):
    """Matrix singular or rank deficient beyond regularization."""


class RotationError(NumericalError):
    def __init__(self, message, n_iter=None):
        super().__init__(message)
        self.n_iter = n_iter


class ReliabilityError(NumericalError):
    pass


class InconclusiveError(NumericalError):
    """Every novelty diagnostic abstained."""


class TransportError(SkillSpaceError):
    def __init__(self, message, attempts=0):
        super().__init__(message)
        self.attempts = attempts


class ResponseParseError(SkillSpaceError):
    def __init__(self, message, payload=""):
        super().__init__(message)
        self.payload = payload
