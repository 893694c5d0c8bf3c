"""Classical sharpness operators and a threshold baseline.

All scores run on single-channel images and are computed in float64 so the
analytic identities (zero response on constants and ramps, transpose
symmetry) hold to tight tolerance.
"""

from dataclasses import dataclass

import numpy as np

from microstack.imgcore import convolve2d, to_grayscale

LAPLACIAN_STENCIL = np.array([[0, 1, 0], [1, -4, 1], [0, 1, 0]], dtype=np.float64)
SOBEL_X = np.array([[-1, 0, 1], [-2, 0, 2], [-1, 0, 1]], dtype=np.float64)
SOBEL_Y = SOBEL_X.T.copy()

OPERATORS = ("laplacian_variance", "tenengrad", "vollath_f4")


@dataclass(frozen=True)
class FocusScore:
    operator: str
    value: float


def _as_gray64(img, min_dim):
    if img.ndim != 2:
        raise ValueError(f"expected a single-channel image, got shape {img.shape}")
    if min(img.shape) < min_dim:
        raise ValueError(f"image {img.shape} smaller than required {min_dim}")
    return np.asarray(img, dtype=np.float64)


def laplacian_variance(img_gray) -> FocusScore:
    """Variance of the 3x3 Laplacian response (reflect padding).

    The 1-px border is excluded: padding makes the stencil non-zero there
    even on affine images, which the score must annihilate.
    """
    g = _as_gray64(img_gray, 3)
    # correlation with the (symmetric) stencil == convolution
    resp = convolve2d(g, LAPLACIAN_STENCIL, padding="reflect")
    return FocusScore("laplacian_variance", float(np.var(resp[1:-1, 1:-1])))


def tenengrad(img_gray) -> FocusScore:
    """Mean squared Sobel gradient magnitude (reflect padding)."""
    g = _as_gray64(img_gray, 3)
    gx = convolve2d(g, SOBEL_X[::-1, ::-1], padding="reflect")
    gy = convolve2d(g, SOBEL_Y[::-1, ::-1], padding="reflect")
    return FocusScore("tenengrad", float(np.mean(gx * gx + gy * gy)))


def vollath_f4(img_gray) -> FocusScore:
    """Autocorrelation gap: mean lag-1 minus mean lag-2 horizontal products."""
    if img_gray.ndim != 2:
        raise ValueError(f"expected a single-channel image, got shape {img_gray.shape}")
    if img_gray.shape[1] < 3:
        raise ValueError(f"image width {img_gray.shape[1]} < 3")
    g = np.asarray(img_gray, dtype=np.float64)
    lag1 = float(np.mean(g[:, :-1] * g[:, 1:]))
    lag2 = float(np.mean(g[:, :-2] * g[:, 2:]))
    return FocusScore("vollath_f4", lag1 - lag2)


_OP_FUNCS = {
    "laplacian_variance": laplacian_variance,
    "tenengrad": tenengrad,
    "vollath_f4": vollath_f4,
}


def score_image(img, operator) -> FocusScore:
    """Score any image with the named operator (color goes through luma)."""
    try:
        fn = _OP_FUNCS[operator]
    except KeyError:
        raise ValueError(f"unknown focus operator {operator!r}; choose from {OPERATORS}")
    return fn(to_grayscale(img))


def classify_by_threshold(score: FocusScore, threshold):
    """in_focus iff value >= threshold (boundary inclusive)."""
    if threshold < 0:
        raise ValueError(f"threshold must be >= 0, got {threshold}")
    return "in_focus" if score.value >= threshold else "out_of_focus"


def best_threshold_accuracy(values, labels):
    """Exhaustive threshold sweep; returns (best accuracy, best threshold).

    `labels` are booleans (True = in focus); candidate thresholds are the
    observed values plus 0, so every achievable split is tried.
    """
    values = np.asarray(values, dtype=np.float64)
    labels = np.asarray(labels, dtype=bool)
    if values.shape != labels.shape or values.size == 0:
        raise ValueError("values and labels must be equal-length and non-empty")
    best_acc, best_thr = -1.0, 0.0
    for thr in np.unique(np.concatenate([[0.0], values])):
        acc = float(((values >= thr) == labels).mean())
        if acc > best_acc:
            best_acc, best_thr = acc, float(thr)
    return best_acc, best_thr
