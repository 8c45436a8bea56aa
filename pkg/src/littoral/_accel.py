"""Backend selection for the compiled kernels.

Set ``LITTORAL_BACKEND=numpy`` to force the pure-numpy code paths; the default
is ``numba`` whenever numba imports cleanly.
"""
import os

BACKENDS = ("numba", "numpy")

try:
    import numba as _numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    _numba = None

HAVE_NUMBA = _numba is not None


def _default_backend():
    requested = os.environ.get("LITTORAL_BACKEND", "numba").strip().lower()
    if requested not in BACKENDS:
        raise ValueError(f"LITTORAL_BACKEND must be one of {BACKENDS}, got {requested!r}")
    if requested == "numba" and not HAVE_NUMBA:
        return "numpy"
    return requested


BACKEND = _default_backend()


def resolve(backend=None):
    """Return the backend to use for a call, honouring an explicit override."""
    if backend is None:
        return BACKEND
    if backend not in BACKENDS:
        raise ValueError(f"unknown backend {backend!r}")
    if backend == "numba" and not HAVE_NUMBA:
        raise RuntimeError("numba backend requested but numba is not installed")
    return backend


def njit(*args, **kwargs):
    """``numba.njit`` when available, otherwise an identity decorator."""
    if HAVE_NUMBA:
        return _numba.njit(*args, **kwargs)

    def wrap(fn):
        return fn

    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return wrap
