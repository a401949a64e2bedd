"""Exception types raised across the package."""


class StratumError(Exception):
    """Base class for all domain/data errors (CLI exit code 1)."""


class DataFormatError(StratumError, ValueError):
    """A file does not conform to one of the canonical CSV formats."""

    def __init__(self, message, line=None, path=None):
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where += f"{path}"
        if line is not None:
            where += f"{':' if where else ''}line {line}"
        super().__init__(f"{where}: {message}" if where else message)


class ValidationError(StratumError, ValueError):
    """Arguments violate an operation's precondition."""


class NoCommonClassError(StratumError):
    """Two label sets share no class, so a stratified quantity is undefined."""


class IllConditionedError(StratumError, ArithmeticError):
    """The constraint matrix stayed singular along the whole jitter path."""
