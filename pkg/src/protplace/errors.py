class ProtplaceError(Exception):
    """Base class for all package errors."""


class ParseError(ProtplaceError, ValueError):
    def __init__(self, message, lineno=None):
        self.lineno = lineno
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)


class ValidationError(ProtplaceError, ValueError):
    pass


class PreconditionError(ProtplaceError, ValueError):
    pass


class SerializationError(ProtplaceError, ValueError):
    pass


class SizeLimitError(ProtplaceError, ValueError):
    pass


class SolutionError(ProtplaceError, ValueError):
    pass
