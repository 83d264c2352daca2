"""Exception hierarchy shared across the toolkit.

The CLI maps these onto exit codes: ``ConfigError`` -> 2,
``MissingDependency`` -> 3, every other ``TropeLensError`` -> 4.
"""


class TropeLensError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(TropeLensError):
    pass


class MissingDependency(TropeLensError):
    """A stage was run before the stage producing ``artifact``."""

    def __init__(self, artifact: str):
        super().__init__(f"missing upstream artifact: {artifact}")
        self.artifact = artifact


class DataError(TropeLensError):
    pass


class SchemaError(DataError):
    def __init__(self, message: str, line: int | None = None, path: str | None = None):
        where = ""
        if path is not None:
            where += f"{path}:"
        if line is not None:
            where += f"{line}: "
        elif where:
            where += " "
        super().__init__(f"{where}{message}")
        self.line = line
        self.path = path


class ParseError(DataError):
    pass


class LexiconError(DataError):
    pass


class DegenerateCorpus(DataError):
    pass


class EvalError(DataError):
    pass


class InsufficientData(DataError):
    pass


class DegenerateLabels(DataError):
    pass


class RangeError(DataError, ValueError):
    pass


class FetchError(TropeLensError):
    pass


class NetworkError(FetchError):
    pass


class HttpError(FetchError):
    def __init__(self, status: int, url: str = ""):
        super().__init__(f"HTTP {status} for {url}" if url else f"HTTP {status}")
        self.status = status
        self.url = url


class RobotsDisallowed(FetchError):
    pass
