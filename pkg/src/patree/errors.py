"""Exception types shared across the package."""


class PatreeError(Exception):
    pass


class DomainError(PatreeError, ValueError):
    """A point or set lies outside the support interval."""


class QuadratureError(PatreeError, RuntimeError):
    pass


class UnsupportedFormError(PatreeError, NotImplementedError):
    pass


class PreconditionError(PatreeError, ValueError):
    pass


class CapError(PatreeError, RuntimeError):
    """A size guard (cells, types, states, grid points) was exceeded."""


class DegenerateLawError(PatreeError, RuntimeError):
    pass


class SpectralError(PatreeError, RuntimeError):
    pass


class ConstructionError(PatreeError, RuntimeError):
    """An internal consistency check of a simulation construction failed."""


class ConfigError(PatreeError, ValueError):
    def __init__(self, message, path=None, line=None, column=None):
        self.path = path
        self.line = line
        self.column = column
        where = ""
        if line is not None:
            where = f" (line {line}, column {column})"
        elif path:
            where = f" at '{path}'"
        super().__init__(message + where)
