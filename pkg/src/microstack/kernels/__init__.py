"""Hot numeric kernels, selected by backend.

Each kernel exists as a numba @njit implementation (`jit`) and a pure-numpy
fallback (`plain`) with the same signature and semantics. `backend.USE_NUMBA`
decides which set this module re-exports; everything downstream imports from
here and stays backend-agnostic.

Determinism notes:
 - kernels run single-threaded (callers parallelize across frames), so all
   results are reproducible regardless of thread count;
 - `convolve2d_exact` accumulates taps strictly in row-major order of the
   (already flipped) kernel, matching a direct nested-loop summation
   bit-for-bit at equal dtype.
"""

import numpy as np

from microstack.backend import USE_NUMBA, backend_name

if USE_NUMBA:
    from microstack.kernels.jit import (
        adam_update,
        conv_fwd,
        conv_bwd_dw,
        convolve2d_exact,
        maxpool2_bwd,
        maxpool2_fwd,
    )
else:
    from microstack.kernels.plain import (
        adam_update,
        conv_fwd,
        conv_bwd_dw,
        convolve2d_exact,
        maxpool2_bwd,
        maxpool2_fwd,
    )


def conv_bwd_dx(dout, w):
    """Gradient w.r.t. the padded input: (N, Ci, H+k-1, W+k-1).

    Expressed as a forward convolution of the zero-padded output gradient
    with the spatially flipped, channel-transposed weights, so it reuses the
    fast forward kernel of whichever backend is active.
    """
    k = w.shape[2]
    p = k - 1
    doutpad = np.pad(dout, ((0, 0), (0, 0), (p, p), (p, p)), mode="constant")
    wt = np.ascontiguousarray(w[:, :, ::-1, ::-1].transpose(1, 0, 2, 3))
    bias = np.zeros(w.shape[1], dtype=dout.dtype)
    return conv_fwd(doutpad, wt, bias)


__all__ = [
    "adam_update",
    "backend_name",
    "conv_fwd",
    "conv_bwd_dw",
    "conv_bwd_dx",
    "convolve2d_exact",
    "maxpool2_bwd",
    "maxpool2_fwd",
]
