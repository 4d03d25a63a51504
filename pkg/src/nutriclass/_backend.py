"""Kernel backend selection.

Hot loops (split search, SMO, tree routing) have a numba implementation and a
pure-numpy one. ``NUTRICLASS_BACKEND`` picks between them at import time:

* ``numba`` (default when numba imports) - JIT-compiled kernels
* ``numpy`` - vectorised fallback, no compilation

Both backends implement the same arithmetic; results agree to floating-point
rounding but are not guaranteed bit-identical across backends.
"""
import os

ENV_VAR = "NUTRICLASS_BACKEND"

try:
    import numba  # noqa: F401

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    HAS_NUMBA = False


def _resolve():
    requested = os.environ.get(ENV_VAR, "").strip().lower()
    if requested in ("", "auto"):
        return "numba" if HAS_NUMBA else "numpy"
    if requested not in ("numba", "numpy"):
        raise ValueError(f"{ENV_VAR} must be 'numba' or 'numpy', got {requested!r}")
    if requested == "numba" and not HAS_NUMBA:
        raise ImportError(f"{ENV_VAR}=numba but numba is not installed")
    return requested


BACKEND = _resolve()
USE_NUMBA = BACKEND == "numba"
