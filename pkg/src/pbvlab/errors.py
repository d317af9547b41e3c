"""Exception types shared across the package."""


class PbvlabError(Exception):
    """Base class for all package-specific errors."""


class DomainError(PbvlabError, ValueError):
    """An argument is outside the mathematical domain of an operation."""


class InvalidModelError(DomainError):
    """A defect model violates its invariants (non-positive splitting, ...)."""


class CoverageError(DomainError):
    """A wavelength grid does not cover the requested transitions."""


class ValidationError(PbvlabError, ValueError):
    """Structured data violates a contract (arity, labels, ordering, ...)."""


class ParseError(ValidationError):
    """A document could not be parsed. ``row`` is the offending 1-based data row."""

    def __init__(self, message, row=None):
        super().__init__(message if row is None else f"row {row}: {message}")
        self.row = row


class FitError(PbvlabError, RuntimeError):
    """A fit could not be set up (degenerate data); distinct from non-convergence."""


class NormalizationError(DomainError):
    """A correlation histogram has no usable normalization window."""


class NumericError(PbvlabError, RuntimeError):
    """A numerical routine failed to converge."""
