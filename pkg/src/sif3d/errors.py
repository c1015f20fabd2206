"""Exception hierarchy; the CLI maps each class to its own exit code."""


class SifError(Exception):
    pass


class InvalidInputError(SifError, ValueError):
    """Argument violates a documented precondition."""


class ParseError(SifError, ValueError):
    """A file could not be decoded."""


class MeshParseError(ParseError):
    def __init__(self, message, path=None, line=None):
        where = ""
        if path is not None:
            where += f"{path}"
        if line is not None:
            where += f":{line}"
        super().__init__(f"{where}: {message}" if where else message)
        self.path = path
        self.line = line


class EmptyMeshError(SifError, ValueError):
    pass


class NumericalError(SifError, ArithmeticError):
    """Non-finite values or degenerate geometry stopped a computation."""
