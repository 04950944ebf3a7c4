"""Kernel backend selection.

The compiled Cython kernels are used when importable; otherwise the numpy
fallback is used. Setting ``QFINSEQ_PURE_PYTHON=1`` forces the fallback.
"""
import os

from . import _kernels_py

BACKEND = "python"
kernels = _kernels_py

if not os.environ.get("QFINSEQ_PURE_PYTHON"):
    try:
        from . import _kernels as _compiled
    except ImportError:
        pass
    else:
        kernels = _compiled
        BACKEND = "cython"


def get_kernels(name=None):
    """Return a kernel module by name (``"cython"``, ``"python"`` or the active one)."""
    if name is None:
        return kernels
    if name == "python":
        return _kernels_py
    if name == "cython":
        from . import _kernels as compiled

        return compiled
    raise ValueError(f"unknown kernel backend {name!r}")
