"""Pick the kernel implementation at import time.

Set ``SIRTIMEOPT_PURE_PYTHON=1`` to force the pure-Python kernels.
"""
import os

from . import _pykernels

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None

if _ckernels is not None and not os.environ.get("SIRTIMEOPT_PURE_PYTHON"):
    kernels = _ckernels
    NAME = "cython"
else:
    kernels = _pykernels
    NAME = "python"


def get(name: str):
    """Return the kernel module called ``name`` ("cython" or "python")."""
    if name == "python":
        return _pykernels
    if name == "cython":
        if _ckernels is None:
            raise ImportError("compiled kernels are not available")
        return _ckernels
    raise ValueError(f"unknown backend {name!r}")
