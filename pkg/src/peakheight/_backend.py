"""Selects the compiled kernels when importable, else the numpy fallback.

Set ``PEAKHEIGHT_BACKEND=python`` to force the fallback.
"""

import os

from . import _pykernels

if os.environ.get("PEAKHEIGHT_BACKEND", "").lower() == "python":
    _impl = _pykernels
else:
    try:
        from . import _kernels as _impl
    except ImportError:  # extension not built
        _impl = _pykernels

#: ``"compiled"`` or ``"python"``.
BACKEND = "python" if _impl is _pykernels else "compiled"

hessian_weights = _impl.hessian_weights
local_maxima_mask = _impl.local_maxima_mask
