"""Exception hierarchy shared across the package.

Every error raised by twinscope derives from TwinscopeError so callers
(CLI, HTTP service) can map failures to diagnostics uniformly.
"""


class TwinscopeError(Exception):
    """Base class for all twinscope errors."""


class LoadError(TwinscopeError):
    """A data or artifact file could not be read or is malformed."""


class ValidationError(TwinscopeError):
    """An input value violates a documented contract."""

    def __init__(self, message: str, field: str | None = None):
        super().__init__(message)
        self.field = field


class RuleParseError(TwinscopeError):
    """A rule expression or table document failed to parse.

    `offset` is a character offset for expression errors; `line` a 1-based
    line number for table-document errors. Either may be None.
    """

    def __init__(self, message: str, offset: int | None = None, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.offset = offset
        self.line = line


class AmbiguousMatchError(TwinscopeError):
    """A UNIQUE-policy table matched more than one row."""

    def __init__(self, rows: list[int]):
        super().__init__(f"UNIQUE hit policy violated: rows {rows} all match")
        self.rows = list(rows)


class TrainingError(TwinscopeError):
    """Model training preconditions not met (e.g. single-class data)."""


class ExplainError(TwinscopeError):
    """The surrogate or PDP computation cannot proceed."""


class NoCrossingError(TwinscopeError):
    """A PDP curve never crosses the requested level."""


class FlatCurveError(TwinscopeError):
    """A PDP curve has no variation to locate a threshold in."""


class StaleRevisionError(TwinscopeError):
    """The table cell a revision targets no longer matches the proposal."""


class NotFoundError(TwinscopeError):
    """A patient, revision, or other keyed entity does not exist."""


class ConflictError(TwinscopeError):
    """An entity with the given identity already exists."""


class CorruptLogError(TwinscopeError):
    """A twin log contains an unreadable record before the final one."""

    def __init__(self, message: str, path: str, offset: int):
        super().__init__(message)
        self.path = path
        self.offset = offset
