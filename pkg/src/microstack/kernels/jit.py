"""numba implementations of the hot kernels.

Layout is NCHW with the image row (x axis) innermost so the tight loops
vectorize. Kernels are compiled single-threaded with nogil: on the small
shapes this package trains, per-call thread synchronization costs more than
a second core buys, and callers parallelize across frames instead. 1x1
convolutions delegate to the BLAS-backed fallback (they are plain matmuls).
"""

import numpy as np
from numba import njit

from microstack.kernels import plain


@njit(fastmath=True, nogil=True, cache=True)
def _conv_fwd_k3(xpad, w, b, out):
    N, Co, Ho, Wo = out.shape
    Ci = w.shape[1]
    for n in range(N):
        for co in range(Co):
            acc = np.empty(Wo, dtype=out.dtype)
            for y in range(Ho):
                for x in range(Wo):
                    acc[x] = b[co]
                for ci in range(Ci):
                    for dy in range(3):
                        row = xpad[n, ci, y + dy]
                        w0 = w[co, ci, dy, 0]
                        w1 = w[co, ci, dy, 1]
                        w2 = w[co, ci, dy, 2]
                        for x in range(Wo):
                            acc[x] += w0 * row[x] + w1 * row[x + 1] + w2 * row[x + 2]
                for x in range(Wo):
                    out[n, co, y, x] = acc[x]


@njit(fastmath=True, nogil=True, cache=True)
def _conv_fwd_any(xpad, w, b, out):
    N, Co, Ho, Wo = out.shape
    Ci = w.shape[1]
    k = w.shape[2]
    for n in range(N):
        for co in range(Co):
            acc = np.empty(Wo, dtype=out.dtype)
            for y in range(Ho):
                for x in range(Wo):
                    acc[x] = b[co]
                for ci in range(Ci):
                    for dy in range(k):
                        row = xpad[n, ci, y + dy]
                        for dx in range(k):
                            wv = w[co, ci, dy, dx]
                            for x in range(Wo):
                                acc[x] += wv * row[x + dx]
                for x in range(Wo):
                    out[n, co, y, x] = acc[x]


def conv_fwd(xpad, w, b):
    """Same-size convolution forward on pre-padded input.

    xpad: (N, Ci, H+k-1, W+k-1); w: (Co, Ci, k, k); b: (Co,).
    Returns (N, Co, H, W).
    """
    k = w.shape[2]
    if k == 1:
        return plain.conv_fwd(xpad, w, b)
    N = xpad.shape[0]
    Co = w.shape[0]
    Ho = xpad.shape[2] - k + 1
    Wo = xpad.shape[3] - k + 1
    out = np.empty((N, Co, Ho, Wo), dtype=xpad.dtype)
    if k == 3:
        _conv_fwd_k3(xpad, w, b, out)
    else:
        _conv_fwd_any(xpad, w, b, out)
    return out


@njit(fastmath=True, nogil=True, cache=True)
def _conv_bwd_dw_k3(xpad, dout, dw):
    # vector accumulator rows; the horizontal reduction happens once at the end
    N, Co, Ho, Wo = dout.shape
    Ci = dw.shape[1]
    acc = np.empty((3, Wo), dtype=xpad.dtype)
    for co in range(Co):
        for ci in range(Ci):
            for dy in range(3):
                for x in range(Wo):
                    acc[0, x] = 0
                    acc[1, x] = 0
                    acc[2, x] = 0
                for n in range(N):
                    for y in range(Ho):
                        drow = dout[n, co, y]
                        xrow = xpad[n, ci, y + dy]
                        for x in range(Wo):
                            d = drow[x]
                            acc[0, x] += d * xrow[x]
                            acc[1, x] += d * xrow[x + 1]
                            acc[2, x] += d * xrow[x + 2]
                for dx in range(3):
                    s = xpad.dtype.type(0)
                    for x in range(Wo):
                        s += acc[dx, x]
                    dw[co, ci, dy, dx] = s


@njit(fastmath=True, nogil=True, cache=True)
def _conv_bwd_dw_any(xpad, dout, dw):
    N, Co, Ho, Wo = dout.shape
    Ci = dw.shape[1]
    k = dw.shape[2]
    acc = np.empty(Wo, dtype=xpad.dtype)
    for co in range(Co):
        for ci in range(Ci):
            for dy in range(k):
                for dx in range(k):
                    for x in range(Wo):
                        acc[x] = 0
                    for n in range(N):
                        for y in range(Ho):
                            drow = dout[n, co, y]
                            xrow = xpad[n, ci, y + dy]
                            for x in range(Wo):
                                acc[x] += drow[x] * xrow[x + dx]
                    s = xpad.dtype.type(0)
                    for x in range(Wo):
                        s += acc[x]
                    dw[co, ci, dy, dx] = s


def conv_bwd_dw(xpad, dout, k):
    """Weight gradient: (Co, Ci, k, k) from padded input and output grad."""
    if k == 1:
        return plain.conv_bwd_dw(xpad, dout, k)
    Ci = xpad.shape[1]
    Co = dout.shape[1]
    dw = np.empty((Co, Ci, k, k), dtype=dout.dtype)
    if k == 3:
        _conv_bwd_dw_k3(xpad, dout, dw)
    else:
        _conv_bwd_dw_any(xpad, dout, dw)
    return dw


@njit(fastmath=True, nogil=True, cache=True)
def _maxpool2_fwd(x, out, arg):
    N, C, Ho, Wo = out.shape
    for n in range(N):
        for c in range(C):
            for y in range(Ho):
                for x2 in range(Wo):
                    yy = 2 * y
                    xx = 2 * x2
                    best = x[n, c, yy, xx]
                    bi = 0
                    v = x[n, c, yy, xx + 1]
                    if v > best:
                        best = v
                        bi = 1
                    v = x[n, c, yy + 1, xx]
                    if v > best:
                        best = v
                        bi = 2
                    v = x[n, c, yy + 1, xx + 1]
                    if v > best:
                        best = v
                        bi = 3
                    out[n, c, y, x2] = best
                    arg[n, c, y, x2] = bi


def maxpool2_fwd(x):
    """2x2 stride-2 max pool; ties keep the first window position row-major."""
    N, C, H, W = x.shape
    out = np.empty((N, C, H // 2, W // 2), dtype=x.dtype)
    arg = np.empty((N, C, H // 2, W // 2), dtype=np.uint8)
    _maxpool2_fwd(x, out, arg)
    return out, arg


@njit(fastmath=True, nogil=True, cache=True)
def _maxpool2_bwd(dout, arg, dx):
    N, C, Ho, Wo = dout.shape
    for n in range(N):
        for c in range(C):
            for y in range(Ho):
                for x2 in range(Wo):
                    bi = arg[n, c, y, x2]
                    dx[n, c, 2 * y + bi // 2, 2 * x2 + bi % 2] = dout[n, c, y, x2]


def maxpool2_bwd(dout, arg, in_h, in_w):
    """Route pooled gradient back to the argmax positions."""
    N, C = dout.shape[:2]
    dx = np.zeros((N, C, in_h, in_w), dtype=dout.dtype)
    _maxpool2_bwd(dout, arg, dx)
    return dx


@njit(fastmath=True, nogil=True, cache=True)
def _adam_update(p, g, m, v, lr, beta1, beta2, eps, bc1, bc2):
    one = p.dtype.type(1)
    for i in range(p.size):
        gi = g[i]
        mi = beta1 * m[i] + (one - beta1) * gi
        vi = beta2 * v[i] + (one - beta2) * gi * gi
        m[i] = mi
        v[i] = vi
        p[i] -= lr * (mi / bc1) / (np.sqrt(vi / bc2) + eps)


def adam_update(p, g, m, v, lr, beta1, beta2, eps, bc1, bc2):
    """Bias-corrected Adam step, in place on flat float views."""
    dt = p.dtype.type
    _adam_update(p, g, m, v, dt(lr), dt(beta1), dt(beta2), dt(eps), dt(bc1), dt(bc2))


@njit(nogil=True, cache=True)
def _convolve2d_exact(padded, kflip, out):
    # No fastmath and in-dtype accumulation: tap order is the row-major order
    # of kflip, exactly as a nested-loop summation would produce.
    Ho, Wo = out.shape
    k = kflip.shape[0]
    for y in range(Ho):
        for x in range(Wo):
            out[y, x] = kflip[0, 0] * padded[y, x]
            for t in range(1, k * k):
                u = t // k
                vv = t % k
                out[y, x] += kflip[u, vv] * padded[y + u, x + vv]


def convolve2d_exact(padded, kflip):
    """Single-plane correlation with an already flipped kernel.

    Accumulates taps in row-major kernel order (no fastmath), so the result
    matches direct nested-loop summation bit-for-bit at equal dtype.
    """
    k = kflip.shape[0]
    out = np.empty(
        (padded.shape[0] - k + 1, padded.shape[1] - k + 1), dtype=padded.dtype
    )
    _convolve2d_exact(padded, kflip, out)
    return out
