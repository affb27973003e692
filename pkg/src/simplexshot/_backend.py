"""Kernel backend selection.

The compiled Cython core is used when it was built; otherwise the numpy
fallback is loaded.  Setting ``SIMPLEXSHOT_PURE_PYTHON=1`` forces the
fallback.  Callers look up ``_backend.kernels`` at call time, so swapping
the attribute (as the test-suite does) switches every module at once.
"""
import os

from . import _kernels_py

try:
    from . import _kernels_c
except ImportError:  # extension not built
    _kernels_c = None

if _kernels_c is not None and not os.environ.get("SIMPLEXSHOT_PURE_PYTHON"):
    kernels = _kernels_c
else:
    kernels = _kernels_py


def available():
    """Names of the importable backends, compiled first."""
    names = []
    if _kernels_c is not None:
        names.append(_kernels_c.NAME)
    names.append(_kernels_py.NAME)
    return names


def get(name):
    if name == _kernels_py.NAME:
        return _kernels_py
    if name == "compiled" and _kernels_c is not None:
        return _kernels_c
    raise KeyError(f"backend {name!r} is not available")
