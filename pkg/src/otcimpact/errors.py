"""Typed errors with stable machine-readable codes.

Every domain failure raises an :class:`ImpactError` subclass carrying a
``code`` string that the CLI serializes into its error JSON. Codes are part
of the external contract and must not be renamed.
"""

from __future__ import annotations


class ImpactError(Exception):
    """Base class for all domain errors."""

    code = "IMPACT_ERROR"

    def __init__(self, message: str = "", **context):
        self.context = dict(context)
        if context:
            detail = ", ".join(f"{k}={v}" for k, v in context.items())
            message = f"{message} ({detail})" if message else detail
        super().__init__(message or self.code)

    def to_json(self) -> dict:
        return {"error": self.code, "message": str(self), **self.context}


class ValidationError(ImpactError):
    """A record violates a type invariant. ``code`` names the field rule."""

    def __init__(self, code: str, message: str = "", **context):
        self.code = code
        super().__init__(message, **context)


class ParseError(ImpactError):
    code = "PARSE_ERROR"

    def __init__(self, message: str = "", line: int | None = None, **context):
        if line is not None:
            context["line"] = line
        self.line = line
        super().__init__(message, **context)


class SchemaMismatchError(ImpactError):
    code = "SCHEMA_MISMATCH"


class EmptyFileError(ImpactError):
    code = "EMPTY_FILE"


class EmptyInputError(ImpactError):
    code = "EMPTY_INPUT"


class NoPriorQuoteError(ImpactError):
    code = "NO_PRIOR_QUOTE"


class TooShortError(ImpactError):
    code = "TOO_SHORT"


class NoLabelsError(ImpactError):
    code = "NO_LABELS"


class QTooLowError(ImpactError):
    code = "Q_TOO_LOW"


class EmptyCategoryError(ImpactError):
    code = "EMPTY_CATEGORY"


class TooFewBinsError(ImpactError):
    code = "TOO_FEW_BINS"


class SingularSystemError(ImpactError):
    code = "SINGULAR_SYSTEM"


class DimensionMismatchError(ImpactError):
    code = "DIMENSION_MISMATCH"


class NonConvergedError(ImpactError):
    code = "NON_CONVERGED"


class TooFewPointsError(ImpactError):
    code = "TOO_FEW_POINTS"


class MissingInputError(ImpactError):
    code = "MISSING_INPUT"
