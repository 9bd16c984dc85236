"""Hot-kernel backend selection.

The stationary-recursion kernels exist twice: compiled with numba's @njit and
as vectorized numpy loops.  ``MARQ_BACKEND=numpy`` forces the fallback (for
environments without a working numba, or for benchmarking); ``numba`` forces
the compiled path; unset picks numba when importable.  Both paths consume the
same SplitMix64 streams in the same order, so estimates are bit-identical.
"""

from __future__ import annotations

import os

ENV_VAR = "MARQ_BACKEND"


def numba_available() -> bool:
    try:
        import numba  # noqa: F401
    except ImportError:
        return False
    return True


def active_backend() -> str:
    forced = os.environ.get(ENV_VAR, "").strip().lower()
    if forced in ("numba", "numpy"):
        if forced == "numba" and not numba_available():
            raise RuntimeError(f"{ENV_VAR}=numba but numba is not importable")
        return forced
    if forced:
        raise RuntimeError(f"{ENV_VAR} must be 'numba' or 'numpy', got {forced!r}")
    return "numba" if numba_available() else "numpy"
