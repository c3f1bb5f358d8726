"""Hot-kernel backend, chosen once at import.

The compiled extension is used when it was built; otherwise the numpy
fallback is loaded. Setting ``SRK_PURE_PYTHON=1`` forces the fallback.
"""

import os

from . import _pyfallback

BACKEND = "python"
_impl = _pyfallback

if os.environ.get("SRK_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as _impl  # noqa: F811
        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _pyfallback

philox4x32 = _impl.philox4x32
philox_blocks = _impl.philox_blocks
fourier_area = _impl.fourier_area
chen_aggregate = _impl.chen_aggregate


def compiled_available():
    try:
        from . import _ckernels  # noqa: F401
    except ImportError:
        return False
    return True


def get_backend(name):
    """Return the kernel module for ``name`` in {"python", "cython"}."""
    if name == "python":
        return _pyfallback
    if name == "cython":
        from . import _ckernels
        return _ckernels
    raise ValueError(f"unknown kernel backend {name!r}")
