"""Exception hierarchy for fairatlas."""


class FairAtlasError(Exception):
    """Base class for all fairatlas errors."""


class ParameterError(FairAtlasError, ValueError):
    """A parameter is outside an operation's accepted range."""


class DomainError(FairAtlasError, ValueError):
    """An input value lies outside the mathematical domain of an operation."""


class ParseError(FairAtlasError):
    """A text input could not be parsed.

    Carries the 1-based line number of the offending line.
    """

    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


class DegenerateGraphError(FairAtlasError):
    """The graph has fewer than two nodes."""


class ConnectivityError(FairAtlasError):
    """The graph is not connected where a connected graph is required."""


class EmptyCoreError(FairAtlasError):
    """k-core peeling removed every node; the caller decides whether that is fatal."""
