"""Numba availability and the pure-numpy switch.

Set ``DIRACINV_PURE_NUMPY=1`` to force the numpy implementations of the hot
kernels even when numba is installed. ``DIRACINV_NUM_THREADS`` caps the numba
thread pool.
"""
import os

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    numba = None
    HAVE_NUMBA = False


def _env_flag(name):
    return os.environ.get(name, "").strip().lower() in ("1", "true", "yes", "on")


USE_NUMBA = HAVE_NUMBA and not _env_flag("DIRACINV_PURE_NUMPY")

if HAVE_NUMBA and os.environ.get("DIRACINV_NUM_THREADS"):
    try:
        numba.set_num_threads(int(os.environ["DIRACINV_NUM_THREADS"]))
    except (ValueError, RuntimeError):
        pass


def njit(*args, **kwargs):
    """``numba.njit`` with caching on, or a no-op decorator without numba."""
    kwargs.setdefault("cache", True)
    if not HAVE_NUMBA:
        if args and callable(args[0]):
            return args[0]
        return lambda f: f
    return numba.njit(*args, **kwargs)
