"""Exception hierarchy. The CLI maps each family to an exit code."""


class ChaosLabError(Exception):
    """Base class for all package errors."""

    exit_code = 2


class PreconditionError(ChaosLabError, ValueError):
    """An input violates a documented precondition."""


class DomainError(PreconditionError):
    """An argument lies outside the domain of the operation."""


class ShapeError(PreconditionError):
    """Kernel orders or basis sizes do not match."""


class DegenerateError(PreconditionError):
    """The input is degenerate (for instance, all coefficients vanish)."""


class DivergenceError(PreconditionError):
    """A series required by the operation does not converge."""


class EmbeddingError(PreconditionError):
    """Circulant embedding is not positive semidefinite."""


class PrecisionError(PreconditionError):
    """A truncation could not reach the requested accuracy."""


class CoverageError(PreconditionError):
    """An evaluation grid leaves the supported region."""


class CapacityError(ChaosLabError):
    """A size or order cap was exceeded."""

    exit_code = 3


class ParseError(ChaosLabError):
    """A file could not be parsed."""

    exit_code = 4

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
