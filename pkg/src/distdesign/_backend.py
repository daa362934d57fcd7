"""Pick the swap-search kernel implementation at import time.

The compiled ``_kernels`` extension is preferred; the pure-Python
``_pykernels`` module is used when the extension is missing or when
``DISTDESIGN_PURE_PYTHON`` is set to a non-empty value.
"""
import importlib
import os

from . import _pykernels


def _load():
    if os.environ.get("DISTDESIGN_PURE_PYTHON"):
        return _pykernels
    try:
        return importlib.import_module("distdesign._kernels")
    except ImportError:
        return _pykernels


kernels = _load()


def get(name):
    """Return a specific backend: ``"cython"`` or ``"python"``."""
    if name == "python":
        return _pykernels
    if name == "cython":
        return importlib.import_module("distdesign._kernels")
    raise ValueError(f"unknown backend {name!r}")


def available():
    names = ["python"]
    try:
        importlib.import_module("distdesign._kernels")
        names.insert(0, "cython")
    except ImportError:
        pass
    return names
