"""Kernel backend selection.

The projector hot loops exist twice: a numba ``@njit`` version and a pure
numpy fallback.  The active path is chosen once at import time from the
``TILTRECON_BACKEND`` environment variable:

    TILTRECON_BACKEND=numba   force numba (error if numba is missing)
    TILTRECON_BACKEND=numpy   force the pure numpy fallback
    unset                     numba when importable, numpy otherwise

Both paths implement the same discretization; they agree to float64
round-off (the accumulation order differs).  ``benchmarks/bench_projector.py``
times one against the other.
"""

import os

from .errors import ParameterError

try:
    import numba  # noqa: F401

    NUMBA_AVAILABLE = True
except ImportError:  # pragma: no cover
    NUMBA_AVAILABLE = False

_requested = os.environ.get("TILTRECON_BACKEND", "").strip().lower()

if _requested == "":
    ACTIVE_BACKEND = "numba" if NUMBA_AVAILABLE else "numpy"
elif _requested == "numpy":
    ACTIVE_BACKEND = "numpy"
elif _requested == "numba":
    if not NUMBA_AVAILABLE:  # pragma: no cover
        raise ParameterError("TILTRECON_BACKEND=numba but numba is not importable")
    ACTIVE_BACKEND = "numba"
else:  # pragma: no cover
    raise ParameterError(
        f"TILTRECON_BACKEND must be 'numba' or 'numpy', got {_requested!r}"
    )


def active_backend() -> str:
    """Name of the kernel path selected at import time."""
    return ACTIVE_BACKEND
