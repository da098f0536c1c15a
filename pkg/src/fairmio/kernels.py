"""Select the compiled kernels when built, else the pure-Python ones.

Set ``FAIRMIO_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _kernels_py

if os.environ.get("FAIRMIO_PURE_PYTHON") == "1":
    _impl = _kernels_py
else:
    try:
        from . import _kernels as _impl
    except ImportError:
        _impl = _kernels_py

BACKEND = _impl.BACKEND
conjunction_sums = _impl.conjunction_sums
best_conjunction = _impl.best_conjunction

__all__ = ["BACKEND", "conjunction_sums", "best_conjunction", "_kernels_py"]
