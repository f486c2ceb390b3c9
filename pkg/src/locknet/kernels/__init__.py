"""Hot conv/pool kernels with a numba backend and a pure-numpy fallback.

Backend selection, once at import time:

* ``LOCKNET_KERNELS=numba``  require numba (ImportError if missing)
* ``LOCKNET_KERNELS=numpy``  force the pure-numpy fallback
* unset or ``auto``          numba when importable, numpy otherwise

Both backends are deterministic and produce bit-identical results; dense
layers ride on BLAS either way, so the flag only affects conv/pool speed.
``benchmarks/bench_kernels.py`` compares the two.
"""

import os

from locknet.kernels import numpy_impl

_requested = os.environ.get("LOCKNET_KERNELS", "auto").lower()

if _requested == "numpy":
    _impl = numpy_impl
elif _requested in ("auto", "numba"):
    try:
        from locknet.kernels import numba_impl as _impl
    except ImportError:
        if _requested == "numba":
            raise
        _impl = numpy_impl
else:
    raise ValueError(
        f"LOCKNET_KERNELS must be 'auto', 'numba' or 'numpy', got {_requested!r}"
    )

BACKEND = "numpy" if _impl is numpy_impl else "numba"

conv_output_size = numpy_impl.conv_output_size
im2col = _impl.im2col
col2im = _impl.col2im
maxpool_forward = _impl.maxpool_forward
maxpool_backward = _impl.maxpool_backward
