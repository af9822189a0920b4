"""Exception types shared across the package."""


class IsacError(Exception):
    """Base class for all package errors."""


class DimensionError(IsacError, ValueError):
    """Shapes or alphabets of two objects do not line up."""


class AxisError(IsacError, KeyError):
    """An axis name is unknown, duplicated, or used in overlapping groups."""

    def __str__(self):
        # KeyError quotes its argument; keep messages readable.
        return str(self.args[0]) if self.args else ""


class BindingError(IsacError, ValueError):
    """A chain factor conditions on an axis that is not yet produced, or
    re-produces an axis that already exists."""


class NormalizationError(IsacError, ValueError):
    """A probability vector, kernel row or joint is not normalized."""


class PreconditionError(IsacError, ValueError):
    """An operation was called on an input outside its domain."""


class CapExceededError(IsacError, ValueError):
    """Exact enumeration would exceed the configured state-space cap."""


class CodingError(IsacError, RuntimeError):
    """The coding scheme is undefined for the supplied inputs (for example the
    observed side sequence has zero likelihood under a whole sub-codebook)."""


class DocumentError(IsacError, ValueError):
    """A JSON document failed validation; ``diagnostics`` lists every problem."""

    def __init__(self, diagnostics):
        self.diagnostics = list(diagnostics)
        super().__init__("; ".join(self.diagnostics) or "invalid document")
