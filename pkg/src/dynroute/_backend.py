"""Kernel backend selection.

The compiled ``_kernels`` extension is used when it imports; otherwise, or
when ``DYNROUTE_PURE=1`` is set, the pure-Python twins are used.
"""
import os

from . import _purekernels as pure

kernels = pure
NAME = "python"

if os.environ.get("DYNROUTE_PURE") != "1":
    try:
        from . import _kernels as _compiled
    except ImportError:  # extension not built
        _compiled = None
    if _compiled is not None:
        kernels = _compiled
        NAME = "cython"


def available() -> dict:
    """Backends importable in this environment, by name."""
    out = {"python": pure}
    try:
        from . import _kernels as compiled
    except ImportError:
        return out
    out["cython"] = compiled
    return out
