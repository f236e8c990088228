"""Hot-kernel dispatch.

The compiled extension is used when importable; otherwise the numpy fallback.
Set ``SDESAMPLE_PURE_PYTHON=1`` to force the fallback.
"""
import os

from sdesample import _pykernels

if os.environ.get("SDESAMPLE_PURE_PYTHON", "") not in ("", "0"):
    _impl = _pykernels
else:
    try:
        from sdesample import _ckernels as _impl
    except ImportError:  # extension not built
        _impl = _pykernels

BACKEND = "python" if _impl is _pykernels else "cython"

sde_scan = _impl.sde_scan
rbf_cross = _impl.rbf_cross
sq_dists = _impl.sq_dists

__all__ = ["BACKEND", "sde_scan", "rbf_cross", "sq_dists"]
