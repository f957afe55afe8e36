"""Kernel backend selection.

The compiled ``_kernels`` extension is used when it imports; otherwise the
numpy twin in ``_kernels_py``. Set ``GMEASURE_PURE_PYTHON=1`` to force the
fallback.
"""
import os

from . import _kernels_py

try:
    from . import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None

if _compiled is not None and not os.environ.get("GMEASURE_PURE_PYTHON"):
    kernels = _compiled
    BACKEND = "cython"
else:
    kernels = _kernels_py
    BACKEND = "python"


def available_backends():
    """Mapping of backend name to kernel module, for tests and benchmarks."""
    out = {"python": _kernels_py}
    if _compiled is not None:
        out["cython"] = _compiled
    return out
