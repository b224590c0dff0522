"""Numba/numpy backend selection for the hot kernels.

The analytic 3x3 eigensolver exists in two implementations: scalar kernels
compiled with numba, and a vectorized pure-numpy path. Set EIGENFRAME_NO_NUMBA=1
to force the numpy path (also used automatically when numba is missing).
"""

import os

_FLAG = os.environ.get("EIGENFRAME_NO_NUMBA", "").strip().lower()
NUMBA_DISABLED = _FLAG in ("1", "true", "yes", "on")

try:
    import numba  # noqa: F401

    HAVE_NUMBA = True
except ImportError:
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and not NUMBA_DISABLED


def backend_name() -> str:
    return "numba" if USE_NUMBA else "numpy"


def apply_thread_env() -> None:
    """Honor EIGENFRAME_THREADS for the numba thread pool (BLAS pools follow
    their own env vars, e.g. OPENBLAS_NUM_THREADS)."""
    raw = os.environ.get("EIGENFRAME_THREADS")
    if not raw or not USE_NUMBA:
        return
    try:
        n = max(1, int(raw))
    except ValueError:
        return
    import numba

    numba.set_num_threads(min(n, numba.config.NUMBA_NUM_THREADS))
