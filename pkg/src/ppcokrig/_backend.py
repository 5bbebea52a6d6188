"""Select the compiled kernel core when built, else the numpy fallback.

Set ``PPCOKRIG_PURE_PYTHON=1`` to force the fallback.
"""
import os

from . import _kernels_py

if os.environ.get("PPCOKRIG_PURE_PYTHON", "") not in ("", "0"):
    _impl = _kernels_py
else:
    try:
        from . import _ckernels as _impl
    except ImportError:
        _impl = _kernels_py

COMPILED = _impl is not _kernels_py
BACKEND = "cython" if COMPILED else "python"

corr_matrix = _impl.corr_matrix
profile_columns = _impl.profile_columns
