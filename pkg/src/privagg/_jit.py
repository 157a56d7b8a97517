"""Optional numba acceleration for the hot kernels.

Kernels are written in the numba-compatible subset of Python and numpy.  Set
``PRIVAGG_NO_JIT=1`` (or run without numba installed) to keep them as plain
Python; fleet-level kernels then switch to their vectorised numpy variants.
"""
import os

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

JIT_ENABLED = numba is not None and os.environ.get("PRIVAGG_NO_JIT", "0").strip().lower() not in (
    "1",
    "true",
    "yes",
    "on",
)


def njit(*args, **kwargs):
    """``numba.njit`` when acceleration is enabled, identity otherwise."""
    if not JIT_ENABLED:
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]
        return lambda f: f
    return numba.njit(*args, **kwargs)


def py_func(f):
    """Return the uncompiled Python function behind a jitted kernel."""
    return getattr(f, "py_func", f)
