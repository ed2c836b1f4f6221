"""Exception hierarchy shared by all modules."""


class PMLQMCError(Exception):
    """Base class for every error raised by this package."""


class ConfigurationError(PMLQMCError, ValueError):
    pass


class HierarchyError(PMLQMCError, ValueError):
    """Quadrature hierarchy cannot be nested (point counts not increasing)."""


class MeshError(PMLQMCError, ValueError):
    pass


class InputError(PMLQMCError, ValueError):
    pass


class ParseError(PMLQMCError, ValueError):
    def __init__(self, message, path=None, line=None):
        where = ""
        if path is not None:
            where += f"{path}"
        if line is not None:
            where += f":{line}"
        super().__init__(f"{where}: {message}" if where else message)
        self.path = path
        self.line = line


class NumericalError(PMLQMCError, ArithmeticError):
    pass


class InsufficientDataError(PMLQMCError, ValueError):
    pass
