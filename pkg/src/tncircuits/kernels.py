"""Backend selection for the hot kernels.

The compiled extension is used when importable; setting the environment
variable ``TNCIRCUITS_PURE_PYTHON=1`` forces the numpy fallback.
"""

import importlib
import os

from . import _kernels_py

__all__ = ["BACKEND", "load_backend", "dup_gather", "conv_onehot", "conv", "pool",
           "rac_amplitudes"]

_NAMES = ("dup_gather", "conv_onehot", "conv", "pool", "rac_amplitudes")


def load_backend(name: str):
    """Return the kernel module for ``"cython"`` or ``"python"``."""
    if name == "python":
        return _kernels_py
    if name == "cython":
        return importlib.import_module("._kernels", __package__)
    raise ValueError(f"unknown backend {name!r}")


if os.environ.get("TNCIRCUITS_PURE_PYTHON", "") not in ("", "0"):
    _impl, BACKEND = _kernels_py, "python"
else:
    try:
        _impl, BACKEND = load_backend("cython"), "cython"
    except ImportError:
        _impl, BACKEND = _kernels_py, "python"

dup_gather = _impl.dup_gather
conv_onehot = _impl.conv_onehot
conv = _impl.conv
pool = _impl.pool
rac_amplitudes = _impl.rac_amplitudes
