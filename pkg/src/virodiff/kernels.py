"""Kernel backend selection.

The compiled extension is preferred; set ``VIRODIFF_PURE_PYTHON=1`` to
force the numpy fallback. ``BACKEND`` names the module actually in use.
"""
import os

from . import _pykernels

if os.environ.get("VIRODIFF_PURE_PYTHON", "") not in ("", "0"):
    _impl = _pykernels
else:
    try:
        from . import _ckernels as _impl
    except ImportError:  # extension not built
        _impl = _pykernels

BACKEND = "cython" if _impl is not _pykernels else "python"

csr_matvec = _impl.csr_matvec
reaction = _impl.reaction
pcg = _impl.pcg
power_iteration = _impl.power_iteration


def available_backends():
    """Return ``{name: module}`` for every importable backend."""
    out = {"python": _pykernels}
    try:
        from . import _ckernels
    except ImportError:
        pass
    else:
        out["cython"] = _ckernels
    return out
