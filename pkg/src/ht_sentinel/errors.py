"""Exception hierarchy.

Every error carries the CLI exit code it maps to: 1 for usage/config
problems, 2 for bad input data, 3 for numeric failures.
"""


class HTSentinelError(Exception):
    exit_code = 2


class InvalidInputError(HTSentinelError, ValueError):
    """Input violates a documented precondition."""


class InvalidDataError(InvalidInputError):
    """File or array content is well-formed but semantically invalid."""

    def __init__(self, message, *, index=None, line=None):
        super().__init__(message)
        self.index = index
        self.line = line


class FormatError(InvalidInputError):
    """Malformed file. ``offset`` is a byte offset, ``line`` a 1-based line number."""

    def __init__(self, message, *, offset=None, line=None):
        super().__init__(message)
        self.offset = offset
        self.line = line


class UnsupportedFormatError(FormatError):
    pass


class SchemaError(InvalidInputError):
    def __init__(self, message, *, field=None):
        super().__init__(f"{field}: {message}" if field else message)
        self.field = field


class DegenerateSampleError(InvalidInputError):
    """The sample carries no information about the parameter being fitted."""


class InsufficientTailError(InvalidInputError):
    pass


class DomainError(InvalidInputError):
    pass


class InvalidConfigError(HTSentinelError, ValueError):
    exit_code = 1


class NumericFailureError(HTSentinelError, ArithmeticError):
    exit_code = 3
