"""Hot kernels with a compiled core and a numpy fallback.

The compiled extension is used when it was built at install time. Setting
``TENTLAB_PURE_PYTHON=1`` forces the fallback.
"""
import os

from . import _stencil_py

BACKEND = "python"
stencil_sums = _stencil_py.stencil_sums

if not os.environ.get("TENTLAB_PURE_PYTHON"):
    try:
        from ._stencil import stencil_sums  # noqa: F811
        BACKEND = "cython"
    except ImportError:
        pass


def available_backends():
    """Map backend name to kernel function for every importable backend."""
    out = {"python": _stencil_py.stencil_sums}
    try:
        from ._stencil import stencil_sums as compiled
        out["cython"] = compiled
    except ImportError:
        pass
    return out
