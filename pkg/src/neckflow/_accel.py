"""Optional numba acceleration.

Hot kernels are decorated with :func:`njit`.  When numba is missing, or the
environment variable ``NECKFLOW_DISABLE_JIT`` is set to a truthy value, the
decorator returns the plain Python function and everything runs on numpy.
"""
import os

_FLAG = os.environ.get("NECKFLOW_DISABLE_JIT", "").strip().lower()
JIT_REQUESTED = _FLAG in ("", "0", "false", "no")

try:
    if not JIT_REQUESTED:
        raise ImportError
    import numba as _numba
    JIT_ENABLED = True
except ImportError:  # pragma: no cover - depends on environment
    _numba = None
    JIT_ENABLED = False


def njit(func=None, **kwargs):
    """``numba.njit(cache=True)`` when enabled, identity otherwise."""
    kwargs.setdefault("cache", True)

    def wrap(f):
        if JIT_ENABLED:
            return _numba.njit(**kwargs)(f)
        return f

    if func is None:
        return wrap
    return wrap(func)


def py_func(f):
    """Return the pure-Python body of a possibly jitted function."""
    return getattr(f, "py_func", f)


def is_jitted(f):
    return JIT_ENABLED and hasattr(f, "py_func")
