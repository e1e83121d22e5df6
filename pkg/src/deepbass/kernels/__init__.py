"""Kernel backend selection.

Set DEEPBASS_BACKEND=numpy to force the pure-numpy path, or
DEEPBASS_BACKEND=numba to require the compiled path. By default the
numba kernels are used when numba imports cleanly, falling back to numpy
otherwise. `benchmarks/bench_kernels.py` compares the two.
"""

import os

_requested = os.environ.get("DEEPBASS_BACKEND", "").strip().lower()
if _requested not in ("", "numba", "numpy"):
    raise ValueError(
        f"DEEPBASS_BACKEND must be 'numba' or 'numpy', got {_requested!r}"
    )

if _requested == "numpy":
    from . import numpy_backend as _impl

    BACKEND = "numpy"
else:
    try:
        from . import numba_backend as _impl

        BACKEND = "numba"
    except ImportError:
        if _requested == "numba":
            raise
        from . import numpy_backend as _impl

        BACKEND = "numpy"

conv2d_forward = _impl.conv2d_forward
conv2d_backward_input = _impl.conv2d_backward_input
conv2d_backward_kernels = _impl.conv2d_backward_kernels
maxpool2x2_forward = _impl.maxpool2x2_forward
maxpool2x2_backward = _impl.maxpool2x2_backward
