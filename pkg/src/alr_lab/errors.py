"""Exception types shared across the package."""


class AlrLabError(Exception):
    """Base class for all errors raised by alr_lab."""


class DimensionError(AlrLabError, ValueError):
    pass


class NumericInputError(AlrLabError, ValueError):
    pass


class ParameterError(AlrLabError, ValueError):
    pass


class ClassIndexError(AlrLabError, IndexError):
    pass


class InputError(AlrLabError, ValueError):
    pass


class ParseError(InputError):
    """Malformed dataset file. ``line`` is 1-based."""

    def __init__(self, message: str, line: int | None = None, path=None):
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where += f"{path}"
        if line is not None:
            where += f":{line}" if where else f"line {line}"
        super().__init__(f"{where}: {message}" if where else message)


class StaleCacheError(AlrLabError, RuntimeError):
    pass


class ConfigError(AlrLabError, ValueError):
    """Invalid experiment configuration. ``field`` is a dotted path."""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")
