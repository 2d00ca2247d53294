"""Select between numba-compiled kernels and the plain numpy path.

Set ``GHCONJ_DISABLE_NUMBA=1`` to force the numpy path (also used when numba
is not importable).
"""
import os


def _noop_jit(*args, **kwargs):
    """Stand-in for ``numba.njit`` that returns the function unchanged."""
    if len(args) == 1 and callable(args[0]) and not kwargs:
        f = args[0]
        f.py_func = f
        return f

    def wrap(f):
        f.py_func = f
        return f

    return wrap


def _want_numba():
    flag = os.environ.get("GHCONJ_DISABLE_NUMBA", "").strip().lower()
    if flag in ("1", "true", "yes", "on"):
        return False
    try:
        import numba  # noqa: F401
    except ImportError:
        return False
    return True


USE_NUMBA = _want_numba()

if USE_NUMBA:
    from numba import njit
else:
    njit = _noop_jit

BACKEND = "numba" if USE_NUMBA else "numpy"
