"""Exception types raised by the solver stack."""


class McsdpError(Exception):
    """Base class for all solver errors."""


class NotPositiveDefinite(McsdpError):
    """A pivot fell below tolerance during a Cholesky factorization.

    ``index`` is the 0-based pivot (dense), column (sparse) or clique
    number, depending on the caller.
    """

    def __init__(self, index, message=None):
        self.index = int(index)
        super().__init__(message or f"matrix is not positive definite (pivot {self.index})")


class ZeroDiagonal(McsdpError):
    def __init__(self, index):
        self.index = int(index)
        super().__init__(f"zero diagonal entry at {self.index}")


class NoConvergence(McsdpError):
    pass


class NotChordal(McsdpError):
    def __init__(self, column):
        self.column = int(column)
        super().__init__(f"pattern is not chordal under the given order (column {self.column})")


class StepTooSmall(McsdpError):
    pass


class MaxIterations(McsdpError):
    pass


class WorkerPanic(McsdpError):
    """A column task failed inside a worker thread."""

    def __init__(self, column, cause):
        self.column = int(column)
        self.cause = cause
        super().__init__(f"worker failed on column {self.column}: {cause!r}")


class ParseError(McsdpError):
    def __init__(self, line, reason):
        self.line = line
        self.reason = reason
        super().__init__(f"line {line}: {reason}")


class SdpaIndexError(ParseError, IndexError):
    """Out-of-range index in an SDPA file."""
