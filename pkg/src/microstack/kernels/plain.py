"""Pure-numpy fallbacks for the hot kernels.

Convolutions are expressed as one small matmul per kernel tap so BLAS does
the heavy lifting; semantics match `kernels.jit` (same shapes, same padding
conventions, same tap order for the exact image convolution).
"""

import numpy as np


def conv_fwd(xpad, w, b):
    """Same-size convolution forward on pre-padded input.

    xpad: (N, Ci, H+k-1, W+k-1); w: (Co, Ci, k, k); b: (Co,).
    Returns (N, Co, H, W).
    """
    N, Ci = xpad.shape[:2]
    Co, _, k, _ = w.shape
    Ho = xpad.shape[2] - k + 1
    Wo = xpad.shape[3] - k + 1
    out = np.empty((N, Co, Ho * Wo), dtype=xpad.dtype)
    out[:] = b[:, None]
    for dy in range(k):
        for dx in range(k):
            xs = np.ascontiguousarray(
                xpad[:, :, dy : dy + Ho, dx : dx + Wo]
            ).reshape(N, Ci, Ho * Wo)
            out += np.matmul(w[:, :, dy, dx], xs)
    return out.reshape(N, Co, Ho, Wo)


def conv_bwd_dw(xpad, dout, k):
    """Weight gradient: (Co, Ci, k, k) from padded input and output grad."""
    N, Co, Ho, Wo = dout.shape
    Ci = xpad.shape[1]
    dw = np.empty((Co, Ci, k, k), dtype=dout.dtype)
    dflat = dout.reshape(N, Co, Ho * Wo)
    for dy in range(k):
        for dx in range(k):
            xs = np.ascontiguousarray(
                xpad[:, :, dy : dy + Ho, dx : dx + Wo]
            ).reshape(N, Ci, Ho * Wo)
            # sum over batch of (Co, HW) @ (HW, Ci)
            dw[:, :, dy, dx] = np.einsum("nop,nip->oi", dflat, xs, optimize=True)
    return dw


def maxpool2_fwd(x):
    """2x2 stride-2 max pool; ties keep the first window position row-major."""
    N, C, H, W = x.shape
    win = x.reshape(N, C, H // 2, 2, W // 2, 2)
    # candidates in window scan order (0,0),(0,1),(1,0),(1,1)
    cand = np.stack(
        [win[..., 0, :, 0], win[..., 0, :, 1], win[..., 1, :, 0], win[..., 1, :, 1]],
        axis=-1,
    )
    arg = np.argmax(cand, axis=-1).astype(np.uint8)
    out = np.take_along_axis(cand, arg[..., None].astype(np.intp), axis=-1)[..., 0]
    return np.ascontiguousarray(out), arg


def maxpool2_bwd(dout, arg, in_h, in_w):
    """Route pooled gradient back to the argmax positions."""
    N, C, Ho, Wo = dout.shape
    dx = np.zeros((N, C, in_h, in_w), dtype=dout.dtype)
    dwin = dx.reshape(N, C, Ho, 2, Wo, 2)
    for t in range(4):
        sel = arg == t
        dwin[:, :, :, t // 2, :, t % 2][sel] = dout[sel]
    return dx


def adam_update(p, g, m, v, lr, beta1, beta2, eps, bc1, bc2):
    """Bias-corrected Adam step, in place on flat float views."""
    m *= beta1
    m += (1.0 - beta1) * g
    v *= beta2
    v += (1.0 - beta2) * g * g
    p -= lr * (m / bc1) / (np.sqrt(v / bc2) + eps)


def convolve2d_exact(padded, kflip):
    """Single-plane correlation with an already flipped kernel.

    Accumulates one tap at a time in row-major kernel order, so the result
    matches direct nested-loop summation bit-for-bit at equal dtype.
    """
    k = kflip.shape[0]
    Ho = padded.shape[0] - k + 1
    Wo = padded.shape[1] - k + 1
    out = kflip[0, 0] * padded[:Ho, :Wo]
    for t in range(1, k * k):
        u = t // k
        vv = t % k
        out += kflip[u, vv] * padded[u : u + Ho, vv : vv + Wo]
    return out
