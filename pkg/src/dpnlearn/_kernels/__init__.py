"""Inner-loop kernels with a compiled backend and a NumPy fallback.

The compiled module is used when it was built and ``DPNLEARN_PURE_PYTHON``
is unset; otherwise the NumPy implementation takes over with the same
signatures.
"""
import os

from . import fb_py

BACKEND = "python"
_impl = fb_py
if not os.environ.get("DPNLEARN_PURE_PYTHON"):
    try:
        from . import _fb as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = fb_py

forward_backward = _impl.forward_backward

__all__ = ["BACKEND", "forward_backward", "fb_py"]
