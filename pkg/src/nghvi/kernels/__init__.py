"""Grouped-sampling hot kernels with a numba and a pure-numpy backend.

The backend is chosen once at import time from the ``NGHVI_BACKEND``
environment variable (``numba`` or ``numpy``). Default is numba when it
imports cleanly, numpy otherwise. Both backends implement the same
functions on the same array layouts (rows sorted by group, CSR-style
``offsets`` of length K+1) and agree to floating-point rounding; see
``benchmarks/bench_kernels.py`` for the speed comparison.
"""

import os
import warnings

from . import numpy_backend

_requested = os.environ.get("NGHVI_BACKEND", "").strip().lower()

if _requested == "numpy":
    _impl = numpy_backend
    BACKEND = "numpy"
elif _requested in ("", "numba"):
    try:
        from . import numba_backend as _impl

        BACKEND = "numba"
    except ImportError as exc:
        if _requested == "numba":
            raise ImportError(
                "NGHVI_BACKEND=numba requested but numba is unavailable"
            ) from exc
        warnings.warn("numba unavailable, falling back to numpy kernels")
        _impl = numpy_backend
        BACKEND = "numpy"
else:
    raise ValueError(
        f"NGHVI_BACKEND must be 'numba' or 'numpy', got {_requested!r}"
    )

grouped_sums = _impl.grouped_sums
grouped_chol_precision = _impl.grouped_chol_precision
grouped_mvn_draw = _impl.grouped_mvn_draw
truncnorm_conditional = _impl.truncnorm_conditional


def get_backends():
    """Return {name: module} for every importable backend (for tests/benchmarks)."""
    out = {"numpy": numpy_backend}
    try:
        from . import numba_backend

        out["numba"] = numba_backend
    except ImportError:
        pass
    return out
