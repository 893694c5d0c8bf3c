"""Focus stacking: Harris-response focus maps, mask refinement, composite
fusion, and the Haar-wavelet fusion baseline.

The per-pixel frame index map is the single source of truth for masks: its
derived binary masks are disjoint by construction and cover every pixel.
"""

import warnings
from dataclasses import dataclass

import numpy as np
from PIL import Image as PILImage

from microstack.imgcore import ZStack, convolve2d, gaussian_kernel, to_grayscale
from microstack.focusmeasure import SOBEL_X, SOBEL_Y


def _box_sum_reflect(plane, window):
    """Sum over a centered window, reflect-padded, via an integral image."""
    if window % 2 != 1:
        raise ValueError(f"window must be odd, got {window}")
    r = window // 2
    padded = np.pad(plane.astype(np.float64), r, mode="reflect")
    ii = np.zeros((padded.shape[0] + 1, padded.shape[1] + 1), dtype=np.float64)
    np.cumsum(np.cumsum(padded, axis=0), axis=1, out=ii[1:, 1:])
    h, w = plane.shape
    return (
        ii[window : window + h, window : window + w]
        - ii[0:h, window : window + w]
        - ii[window : window + h, 0:w]
        + ii[0:h, 0:w]
    )


def _box_count_clipped(indicator, radius):
    """Per-pixel count of true neighbors in a (2r+1)^2 window clipped to the
    image bounds (no padding)."""
    h, w = indicator.shape
    ii = np.zeros((h + 1, w + 1), dtype=np.int64)
    np.cumsum(np.cumsum(indicator.astype(np.int64), axis=0), axis=1, out=ii[1:, 1:])
    ys = np.arange(h)
    xs = np.arange(w)
    y0 = np.maximum(ys - radius, 0)
    y1 = np.minimum(ys + radius + 1, h)
    x0 = np.maximum(xs - radius, 0)
    x1 = np.minimum(xs + radius + 1, w)
    return ii[np.ix_(y1, x1)] - ii[np.ix_(y0, x1)] - ii[np.ix_(y1, x0)] + ii[np.ix_(y0, x0)]


def harris_response(img_gray, k=0.04, window=7):
    """Corner response det(M) - k tr(M)^2 from a box-summed structure tensor."""
    if img_gray.ndim != 2:
        raise ValueError(f"expected a single-channel image, got shape {img_gray.shape}")
    if window >= min(img_gray.shape):
        raise ValueError(f"window {window} not smaller than image {img_gray.shape}")
    g = np.asarray(img_gray, dtype=np.float64)
    gx = convolve2d(g, SOBEL_X[::-1, ::-1], padding="reflect")
    gy = convolve2d(g, SOBEL_Y[::-1, ::-1], padding="reflect")
    sxx = _box_sum_reflect(gx * gx, window)
    syy = _box_sum_reflect(gy * gy, window)
    sxy = _box_sum_reflect(gx * gy, window)
    det = sxx * syy - sxy * sxy
    tr = sxx + syy
    return det - k * tr * tr


def focus_index_map(stack: ZStack, k=0.04, window=7, smooth_window=9):
    """Per pixel, the frame whose smoothed |Harris response| is largest.

    Ties resolve toward the lower frame index. A single-frame stack yields
    an all-zero map with a warning.
    """
    if len(stack) < 2:
        warnings.warn("focus_index_map on a single-frame stack; returning zeros")
        return np.zeros(stack.shape[:2], dtype=np.int32)
    area = smooth_window * smooth_window
    responses = np.stack(
        [
            _box_sum_reflect(np.abs(harris_response(to_grayscale(f), k, window)), smooth_window)
            / area
            for f in stack.frames
        ]
    )
    return responses.argmax(axis=0).astype(np.int32)


def masks_from_index_map(index_map, n_frames):
    """Disjoint per-frame boolean masks whose union is the whole grid."""
    if index_map.min() < 0 or index_map.max() >= n_frames:
        raise ValueError(f"index map values outside [0, {n_frames})")
    return [index_map == i for i in range(n_frames)]


def refine_mask(index_map, radius=4, max_passes=10):
    """Iterated per-pixel majority vote over a (2r+1)^2 neighborhood.

    Stops at a fixed point or after `max_passes`. Ties keep the lowest
    index; windows are clipped at the image borders.
    """
    current = np.asarray(index_map, dtype=np.int32)
    n_labels = int(current.max()) + 1
    for _ in range(max_passes):
        if n_labels == 1:
            break
        counts = np.stack(
            [_box_count_clipped(current == lbl, radius) for lbl in range(n_labels)]
        )
        voted = counts.argmax(axis=0).astype(np.int32)
        if np.array_equal(voted, current):
            break
        current = voted
    return current


def composite_fuse(stack: ZStack, index_map, feather=2.0):
    """Blend frames by their (optionally feathered) selection masks.

    feather is the sigma of the Gaussian applied to each mask indicator;
    0 selects pixels hard from the indexed frames.
    """
    h, w = stack.shape[:2]
    if index_map.shape != (h, w):
        raise ValueError(f"index map {index_map.shape} does not match frames {h}x{w}")
    frames = np.stack(stack.frames)
    if feather <= 0:
        yy, xx = np.mgrid[0:h, 0:w]
        return np.ascontiguousarray(frames[index_map, yy, xx])
    ker = gaussian_kernel(feather)
    weights = np.stack(
        [
            convolve2d((index_map == i).astype(np.float32), ker, padding="reflect")
            for i in range(len(stack))
        ]
    )
    weights /= weights.sum(axis=0, keepdims=True)
    if frames.ndim == 4:
        weights = weights[:, :, :, None]
    return np.clip((weights * frames).sum(axis=0), 0.0, 1.0).astype(np.float32)


# -- Haar wavelets ----------------------------------------------------------

_SQRT_HALF = np.sqrt(0.5)


@dataclass
class WaveletPyramid:
    """Orthonormal Haar pyramid: detail triples finest-to-coarsest, then LL."""

    detail: list  # [(LH, HL, HH), ...]
    ll: np.ndarray
    orig_shape: tuple

    @property
    def levels(self):
        return len(self.detail)


def _dwt_level(x):
    lo = (x[:, 0::2] + x[:, 1::2]) * _SQRT_HALF
    hi = (x[:, 0::2] - x[:, 1::2]) * _SQRT_HALF
    ll = (lo[0::2, :] + lo[1::2, :]) * _SQRT_HALF
    lh = (lo[0::2, :] - lo[1::2, :]) * _SQRT_HALF
    hl = (hi[0::2, :] + hi[1::2, :]) * _SQRT_HALF
    hh = (hi[0::2, :] - hi[1::2, :]) * _SQRT_HALF
    return ll, lh, hl, hh


def _idwt_level(ll, lh, hl, hh):
    h2, w2 = ll.shape
    lo = np.empty((2 * h2, w2), dtype=np.float64)
    hi = np.empty((2 * h2, w2), dtype=np.float64)
    lo[0::2] = (ll + lh) * _SQRT_HALF
    lo[1::2] = (ll - lh) * _SQRT_HALF
    hi[0::2] = (hl + hh) * _SQRT_HALF
    hi[1::2] = (hl - hh) * _SQRT_HALF
    x = np.empty((2 * h2, 2 * w2), dtype=np.float64)
    x[:, 0::2] = (lo + hi) * _SQRT_HALF
    x[:, 1::2] = (lo - hi) * _SQRT_HALF
    return x


def haar_dwt2(img_gray, levels) -> WaveletPyramid:
    """Orthonormal Haar analysis; reflect-pads up to a multiple of 2^levels."""
    if levels < 1:
        raise ValueError(f"levels must be >= 1, got {levels}")
    if img_gray.ndim != 2:
        raise ValueError(f"expected a single plane, got shape {img_gray.shape}")
    h, w = img_gray.shape
    mult = 1 << levels
    th = ((h + mult - 1) // mult) * mult
    tw = ((w + mult - 1) // mult) * mult
    x = np.asarray(img_gray, dtype=np.float64)
    if (th, tw) != (h, w):
        if th - h > h - 1 or tw - w > w - 1:
            raise ValueError(
                f"image {h}x{w} too small to reflect-pad to {th}x{tw} "
                f"for {levels} levels"
            )
        x = np.pad(x, ((0, th - h), (0, tw - w)), mode="reflect")
    detail = []
    for _ in range(levels):
        x, lh, hl, hh = _dwt_level(x)
        detail.append((lh, hl, hh))
    return WaveletPyramid(detail=detail, ll=x, orig_shape=(h, w))


def haar_idwt2(pyr: WaveletPyramid):
    """Inverse transform, cropped back to the recorded original shape."""
    x = pyr.ll
    for lh, hl, hh in reversed(pyr.detail):
        x = _idwt_level(x, lh, hl, hh)
    h, w = pyr.orig_shape
    return x[:h, :w]


def wavelet_fuse(stack: ZStack, levels=4):
    """Fuse frames in the Haar domain: mean LL, max-absolute detail."""
    if len(stack) < 2:
        raise ValueError("wavelet_fuse needs at least two frames")
    frames = stack.frames
    n_ch = 3 if frames[0].ndim == 3 else 1
    fused_channels = []
    for c in range(n_ch):
        planes = [f[:, :, c] if f.ndim == 3 else f for f in frames]
        pyrs = [haar_dwt2(p, levels) for p in planes]
        ll = np.mean([p.ll for p in pyrs], axis=0)
        detail = []
        for lv in range(levels):
            bands = []
            for b in range(3):
                coeffs = np.stack([p.detail[lv][b] for p in pyrs])
                pick = np.abs(coeffs).argmax(axis=0)
                bands.append(np.take_along_axis(coeffs, pick[None], axis=0)[0])
            detail.append(tuple(bands))
        out = haar_idwt2(WaveletPyramid(detail, ll, pyrs[0].orig_shape))
        fused_channels.append(out)
    fused = fused_channels[0] if n_ch == 1 else np.stack(fused_channels, axis=2)
    return np.clip(fused, 0.0, 1.0).astype(np.float32)


def save_index_map(index_map, path):
    """Persist the per-pixel frame index as a 16-bit grayscale PNG."""
    arr = np.asarray(index_map)
    if arr.min() < 0 or arr.max() > 65535:
        raise ValueError("index map outside uint16 range")
    PILImage.fromarray(arr.astype(np.uint16)).save(path)


def load_index_map(path):
    with PILImage.open(path) as im:
        return np.asarray(im, dtype=np.int32)
