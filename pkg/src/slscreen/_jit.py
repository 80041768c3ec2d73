"""JIT switch for the numeric kernels.

Kernels are written against the subset of numpy that numba supports, so the
same source runs compiled or as plain numpy. Set ``SLS_NO_JIT=1`` to force the
pure-numpy path (useful for debugging and for the kernel benchmark).
"""

import os

JIT_DISABLED = os.environ.get("SLS_NO_JIT", "0").lower() in ("1", "true", "yes")

try:
    import numba
except ImportError:  # pragma: no cover
    numba = None

USING_NUMBA = numba is not None and not JIT_DISABLED


def njit(func):
    if USING_NUMBA:
        return numba.njit(cache=True)(func)
    return func
