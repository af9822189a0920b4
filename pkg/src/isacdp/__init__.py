"""Distribution-preserving integrated sensing and communication.

Finite-alphabet probability toolkit, achievable-region evaluators, a
Gaussian example, an exact and Monte-Carlo code simulator, optimal-transport
correction and eavesdropper distortion analysis. ``isacdp.kernels.BACKEND``
reports whether the compiled kernels are in use.
"""
__version__ = "0.1.0"

from .errors import (  # noqa: E402
    AxisError,
    BindingError,
    CapExceededError,
    CodingError,
    DimensionError,
    DocumentError,
    IsacError,
    NormalizationError,
    PreconditionError,
)
from .regions import IsacSystem, RegionPoint  # noqa: E402

__all__ = [
    "__version__",
    "IsacSystem",
    "RegionPoint",
    "IsacError",
    "AxisError",
    "BindingError",
    "CapExceededError",
    "CodingError",
    "DimensionError",
    "DocumentError",
    "NormalizationError",
    "PreconditionError",
]
