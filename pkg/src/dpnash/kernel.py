"""Backend selection for the seeking inner loop.

The compiled extension is used when it was built; otherwise the NumPy
version. Set ``DPNASH_KERNEL=python`` to force the fallback.
"""

import os

from . import _pykernel

try:
    from . import _ckernel
except ImportError:  # extension not built
    _ckernel = None

_BACKENDS = {"python": _pykernel}
if _ckernel is not None:
    _BACKENDS["cython"] = _ckernel


def available_backends():
    return sorted(_BACKENDS)


def get_backend(name=None):
    """Return the kernel module for ``name`` (default: fastest available)."""
    if name is None:
        name = os.environ.get("DPNASH_KERNEL") or ("cython" if _ckernel is not None else "python")
    try:
        return _BACKENDS[name]
    except KeyError:
        raise ValueError(f"kernel backend {name!r} not available; have {available_backends()}") from None


BACKEND = get_backend()
BACKEND_NAME = "cython" if BACKEND is _ckernel else "python"
