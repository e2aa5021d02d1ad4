"""Exception hierarchy shared by the library and the command line."""


class VillageStressError(Exception):
    """Base class for all errors raised by this package."""

    exit_code = 1


class InputError(VillageStressError, ValueError):
    """Malformed or inconsistent input data (CLI exit code 2)."""

    exit_code = 2


class GridParseError(InputError):
    """An ASCII grid could not be parsed."""

    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        where = ""
        if line is not None:
            where = f" (line {line}" + (f", column {column})" if column is not None else ")")
        super().__init__(message + where)


class NumericalError(VillageStressError, ArithmeticError):
    """A computation is undefined for the given data (CLI exit code 3)."""

    exit_code = 3
