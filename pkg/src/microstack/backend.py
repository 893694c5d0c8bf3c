"""Kernel backend selection.

Hot loops exist twice: a numba @njit version and a pure-numpy fallback.
``MICROSTACK_BACKEND=numpy`` forces the fallback (useful on machines where
numba is unavailable or misbehaves, and for benchmarking); anything else, or
an unset variable, selects numba when it imports cleanly.
"""

import os

# OMP layer is quiet on this numba version; TBB emits a version warning.
os.environ.setdefault("NUMBA_THREADING_LAYER", "omp")
# Kernels are single-threaded by design and callers parallelize per frame;
# spinning BLAS workers oversubscribe small machines and cost more than the
# dense-layer GEMMs gain. Only effective when set before numpy loads.
os.environ.setdefault("OPENBLAS_NUM_THREADS", "1")

_requested = os.environ.get("MICROSTACK_BACKEND", "numba").strip().lower()

if _requested not in ("numba", "numpy"):
    raise ValueError(
        f"MICROSTACK_BACKEND must be 'numba' or 'numpy', got {_requested!r}"
    )

USE_NUMBA = False
if _requested == "numba":
    try:
        import numba  # noqa: F401

        USE_NUMBA = True
    except ImportError:
        USE_NUMBA = False


def backend_name() -> str:
    return "numba" if USE_NUMBA else "numpy"
