"""Exception types shared across the package."""


class InvalidParameterError(ValueError):
    pass


class InvalidInputError(ValueError):
    pass


class InvalidMoveError(ValueError):
    pass


class DomainError(ValueError):
    """Argument outside the region where a formula or lemma applies."""


class RangeError(OverflowError):
    pass


class ParseError(ValueError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class UnsupportedFormatError(ValueError):
    pass


class InsufficientDataError(RuntimeError):
    pass


class NumericalError(ArithmeticError):
    """An internal cross-check between two evaluation routes failed."""
