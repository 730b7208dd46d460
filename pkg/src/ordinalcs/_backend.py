"""Pick the compiled kernels when available, else the numpy fallback.

Set ``ORDINALCS_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _pykernels

kernels = _pykernels
BACKEND = "python"

if not os.environ.get("ORDINALCS_PURE_PYTHON"):
    try:
        from . import _kernels as kernels  # noqa: F811

        BACKEND = "cython"
    except ImportError:
        pass

__all__ = ["kernels", "BACKEND"]
