"""Numba switch.

Hot kernels are decorated with :func:`njit`.  Setting ``LIMPROPHET_NUMBA=0``
in the environment (or running without numba installed) turns the decorator
into the identity, so the same kernel source runs as plain numpy/Python.
"""
import os

try:
    import numba
except ImportError:  # pragma: no cover
    numba = None

USE_NUMBA = numba is not None and os.environ.get("LIMPROPHET_NUMBA", "1") not in ("0", "false", "no")


def njit(fn=None, **kwargs):
    kwargs.setdefault("cache", True)
    if not USE_NUMBA:
        if fn is None:
            return lambda f: f
        return fn
    if fn is None:
        return lambda f: numba.njit(f, **kwargs)
    return numba.njit(fn, **kwargs)


def python_version(kernel):
    """Return the uncompiled function behind a kernel (identity if not jitted)."""
    return getattr(kernel, "py_func", kernel)
