"""Backend selection for the hot kernels.

The compiled extension is preferred; set ``SPMLAB_PURE_PYTHON=1`` to force
the NumPy fallback.
"""
import importlib
import os

from . import _kernels_py

_NAMES = ("power_law", "hermite_law", "periodic_tridiag_solve",
          "newton_periodic_1d", "window_oscillation")


def load(name="auto"):
    """Return the kernel module for ``name`` in {"auto", "cython", "python"}."""
    if name == "python":
        return _kernels_py
    try:
        return importlib.import_module("spmlab._kernels")
    except ImportError:
        if name == "cython":
            raise
        return _kernels_py


def available():
    out = ["python"]
    try:
        importlib.import_module("spmlab._kernels")
        out.insert(0, "cython")
    except ImportError:
        pass
    return out


_impl = load("python" if os.environ.get("SPMLAB_PURE_PYTHON") == "1" else "auto")

BACKEND = _impl.BACKEND
LAW_POWER = _kernels_py.LAW_POWER
LAW_HERMITE = _kernels_py.LAW_HERMITE

power_law = _impl.power_law
hermite_law = _impl.hermite_law
periodic_tridiag_solve = _impl.periodic_tridiag_solve
newton_periodic_1d = _impl.newton_periodic_1d
window_oscillation = _impl.window_oscillation
