"""Backend selection for the value-iteration kernels.

The compiled extension ``lrb._core`` is used when importable; otherwise, or
when the environment variable ``LRB_PURE_PYTHON`` is set to a non-empty value
other than ``0``, the pure-Python module ``lrb._pycore`` is used.
"""
import os

from . import _pycore

_force_py = os.environ.get("LRB_PURE_PYTHON", "") not in ("", "0")

if _force_py:
    _impl = _pycore
else:
    try:
        from . import _core as _impl
    except ImportError:  # extension not built
        _impl = _pycore

BACKEND = "python" if _impl is _pycore else "cython"

gsva_solve = _impl.gsva_solve
subsidy_search = _impl.subsidy_search


def get_backend(name):
    """Return the kernel module for ``"cython"`` or ``"python"``."""
    if name == "python":
        return _pycore
    if name == "cython":
        from . import _core
        return _core
    raise ValueError(f"unknown backend {name!r}")
