"""Numerical toolkit for Wiener chaos, Stein's method and related limit theorems."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    CapacityError,
    ChaosLabError,
    CoverageError,
    DegenerateError,
    DivergenceError,
    DomainError,
    EmbeddingError,
    ParseError,
    PrecisionError,
    PreconditionError,
    ShapeError,
)
from .rng import GENERATOR_ID, make_rng  # noqa: E402

__all__ = [
    "CapacityError",
    "ChaosLabError",
    "CoverageError",
    "DegenerateError",
    "DivergenceError",
    "DomainError",
    "EmbeddingError",
    "GENERATOR_ID",
    "ParseError",
    "PrecisionError",
    "PreconditionError",
    "ShapeError",
    "make_rng",
]
