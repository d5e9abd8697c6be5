"""Hot loops: polynomial evaluation and fixed-step RK4.

The compiled extension is used when it was built; otherwise the numpy
fallback is selected. Set ``GEOFLOW_PURE_PYTHON=1`` to force the fallback.
"""
import os

from . import _pykernels

BACKEND = "python"
if not os.environ.get("GEOFLOW_PURE_PYTHON"):
    try:
        from . import _ckernels as _impl
        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _pykernels
else:
    _impl = _pykernels

poly_eval = _impl.poly_eval
rk4 = _impl.rk4

__all__ = ["BACKEND", "poly_eval", "rk4", "_pykernels"]
