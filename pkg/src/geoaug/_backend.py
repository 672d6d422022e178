"""Kernel selection: compiled extension when importable, numpy otherwise.

Set ``GEOAUG_PURE_PYTHON=1`` to force the numpy kernels.
"""

import os

from . import _fallback

fallback = _fallback

if os.environ.get("GEOAUG_PURE_PYTHON", "") not in ("", "0"):
    kernels = _fallback
    compiled = None
else:
    try:
        from . import _kernels as compiled
    except ImportError:  # extension not built
        compiled = None
    kernels = compiled if compiled is not None else _fallback

BACKEND = "cython" if kernels is not _fallback else "python"
