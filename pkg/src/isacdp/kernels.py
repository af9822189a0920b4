"""Hot-loop kernels, backed by the compiled extension when it is available.

Set ``ISACDP_PURE_PYTHON=1`` before import to force the numpy fallback.
``BACKEND`` names the implementation in use ("cython" or "numpy").
"""
import os

from . import _pykernels

_ckernels = None
if os.environ.get("ISACDP_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels
    except ImportError:  # extension not built
        _ckernels = None

_impl = _ckernels if _ckernels is not None else _pykernels
BACKEND = "cython" if _ckernels is not None else "numpy"

sequence_likelihoods = _impl.sequence_likelihoods
mixture_output = _impl.mixture_output
# the matrix-product formulation beats the compiled loop here (see benchmarks/)
joint_type_deviations = _pykernels.joint_type_deviations
blahut_arimoto = _impl.blahut_arimoto


def backends():
    """Map backend name to module for every implementation importable here."""
    found = {"numpy": _pykernels}
    if _ckernels is not None:
        found["cython"] = _ckernels
    else:
        try:
            from . import _ckernels as compiled
        except ImportError:
            pass
        else:
            found["cython"] = compiled
    return found
