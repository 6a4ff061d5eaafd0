"""Scatter/gather kernels behind message passing.

The compiled Cython module is used when it was built; otherwise the numpy
fallback is loaded.  Set ``GCNPHR_PURE_PYTHON=1`` to force the fallback.
Both expose the same five functions; index arrays must be int64 and value
arrays C-contiguous float64 (other float dtypes are routed to numpy).
"""

import os

import numpy as np

from . import _pykernels as python_backend

try:
    if os.environ.get("GCNPHR_PURE_PYTHON", "") not in ("", "0"):
        raise ImportError("pure python backend requested")
    from . import _ckernels as compiled_backend
except ImportError:
    compiled_backend = None

_impl = compiled_backend if compiled_backend is not None else python_backend
BACKEND = "cython" if compiled_backend is not None else "numpy"


def _dispatch(name):
    fast = getattr(_impl, name)
    slow = getattr(python_backend, name)
    if fast is slow:
        return fast

    def kernel(first, *args):
        # compiled kernels are float64-only
        if first.dtype == np.float64:
            return fast(first, *args)
        return slow(first, *args)

    kernel.__name__ = name
    kernel.__doc__ = slow.__doc__
    return kernel


scatter_rows = _dispatch("scatter_rows")
gather_dot = _dispatch("gather_dot")
segment_sum = _dispatch("segment_sum")
segment_softmax = _dispatch("segment_softmax")
segment_softmax_backward = _dispatch("segment_softmax_backward")

__all__ = [
    "BACKEND",
    "compiled_backend",
    "python_backend",
    "scatter_rows",
    "gather_dot",
    "segment_sum",
    "segment_softmax",
    "segment_softmax_backward",
]
