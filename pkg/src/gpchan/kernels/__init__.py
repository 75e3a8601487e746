"""Hot numeric kernels with two interchangeable backends.

The numba backend JIT-compiles the inner loops (policy gradient ascent,
exponent grid scans, exact error enumeration); the numpy backend provides
vectorized fallbacks with identical semantics. Selection:

  GPCHAN_BACKEND=numba   force numba (ImportError if numba is missing)
  GPCHAN_BACKEND=numpy   force the pure-numpy fallback
  unset                  numba when importable, else numpy

Both backends implement the same function set and agree to floating-point
tolerance (see benchmarks/compare_backends.py); results are bit-reproducible
within a fixed backend.
"""

from __future__ import annotations

import os

_requested = os.environ.get("GPCHAN_BACKEND", "").strip().lower()

if _requested not in ("", "numba", "numpy"):
    raise RuntimeError(f"GPCHAN_BACKEND must be 'numba' or 'numpy', got {_requested!r}")

if _requested == "numpy":
    from . import _numpy_impl as _impl

    BACKEND = "numpy"
else:
    try:
        from . import _numba_impl as _impl

        BACKEND = "numba"
    except ImportError:
        if _requested == "numba":
            raise
        from . import _numpy_impl as _impl

        BACKEND = "numpy"


def active_backend() -> str:
    """Name of the backend selected at import time."""
    return BACKEND


ascend_policy = _impl.ascend_policy
project_policy = _impl.project_policy
policy_value = _impl.policy_value
policy_value_batch = _impl.policy_value_batch
scan_v_grid = _impl.scan_v_grid
rate_max_quick = _impl.rate_max_quick
exact_error_table = _impl.exact_error_table
ml_decoder = _impl.ml_decoder
code_search_scan = _impl.code_search_scan
code_search_scan_exhaustive_decoders = _impl.code_search_scan_exhaustive_decoders
mc_tally = _impl.mc_tally
