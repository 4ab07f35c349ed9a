"""
Error types raised across the package.

Every error carries a stable ``error_code`` that the CLI copies into its
``ErrorResponse`` payload, plus optional structured ``details``.
"""

from __future__ import annotations

from typing import Any


class ShuffleSensitivityError(Exception):
    """Base class for all package errors."""

    error_code: str = "INTERNAL_ERROR"

    def __init__(self, message: str, details: dict[str, Any] | None = None) -> None:
        super().__init__(message)
        self.details: dict[str, Any] = dict(details or {})


class ShapeError(ShuffleSensitivityError, ValueError):
    """Operand shapes do not agree (matmul, broadcast, concat, shuffle units)."""

    error_code = "DIMENSION_ERROR"


class LookupIndexError(ShuffleSensitivityError, IndexError):
    """Embedding or gate lookup index outside the table."""

    error_code = "LOOKUP_ERROR"


class ContractError(ShuffleSensitivityError, ValueError):
    """A caller-side precondition was violated."""

    error_code = "CONTRACT_ERROR"


class PreconditionError(ContractError):
    """An experiment precondition (e.g. broad polarization) does not hold."""

    error_code = "PRECONDITION_ERROR"


class TapeStateError(ShuffleSensitivityError, RuntimeError):
    """Tape used outside its lifecycle (no active tape, double backward)."""

    error_code = "STATE_ERROR"


class DomainError(ShuffleSensitivityError, ValueError):
    """Input outside the mathematical domain of a metric or loss."""

    error_code = "DOMAIN_ERROR"


class ConfigurationError(ShuffleSensitivityError, ValueError):
    """Invalid configuration, schema mismatch or unusable pruning decision."""

    error_code = "CONFIG_ERROR"


class NumericError(ShuffleSensitivityError, ArithmeticError):
    """Non-finite loss encountered during training."""

    error_code = "NUMERIC_ERROR"


class ParseError(ShuffleSensitivityError, ValueError):
    """Malformed dataset or config file."""

    error_code = "PARSE_ERROR"

    def __init__(
        self, message: str, line: int | None = None, details: dict[str, Any] | None = None
    ) -> None:
        merged = dict(details or {})
        if line is not None:
            merged["line"] = line
            message = f"line {line}: {message}"
        super().__init__(message, merged)
        self.line = line
