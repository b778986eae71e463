"""Batched numeric kernels with a compiled fast path.

The compiled backend and the numpy fallback perform floating point
operations in the same order, so they return bit-identical results;
backend choice is purely a speed concern. Set FMAX_PURE_PYTHON=1 to
force the fallback (for example to compare the two in benchmarks).
"""

import os

from . import pure

if os.environ.get("FMAX_PURE_PYTHON", "") not in ("", "0"):
    _impl = pure
else:
    try:
        from . import _speedups as _impl
    except ImportError:
        _impl = pure

BACKEND = _impl.BACKEND_NAME

w_matrix = _impl.w_matrix
delta_batch = _impl.delta_batch
gfm_batch = _impl.gfm_batch
recover_d_batch = _impl.recover_d_batch
merge_batch = _impl.merge_batch
