"""JIT backend selection.

Hot loops are written twice: a numba kernel and a vectorized numpy
equivalent. Set ``PSPACE_DISABLE_JIT=1`` to force the numpy path (useful for
debugging and for the backend benchmark).
"""
import os
import warnings

_flag = os.environ.get("PSPACE_DISABLE_JIT", "").strip().lower()
DISABLE_JIT = _flag not in ("", "0", "false", "no")

try:
    import numba
    HAS_NUMBA = True
    # the sandboxed TBB is too old; numba falls back to omp/workqueue anyway
    warnings.filterwarnings("ignore", message="The TBB threading layer")
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAS_NUMBA = False

USE_JIT = HAS_NUMBA and not DISABLE_JIT


def njit(*args, **kwargs):
    """``numba.njit`` when available, identity decorator otherwise."""
    if HAS_NUMBA:
        kwargs.setdefault("cache", True)
        return numba.njit(*args, **kwargs)

    def wrap(fn):
        return fn

    if len(args) == 1 and callable(args[0]):
        return args[0]
    return wrap


prange = numba.prange if HAS_NUMBA else range


def set_threads(n):
    """Limit the numba worker pool; silently ignored without numba."""
    if HAS_NUMBA and n:
        numba.set_num_threads(min(int(n), numba.config.NUMBA_NUM_THREADS))


def backend_name():
    return "numba" if USE_JIT else "numpy"
