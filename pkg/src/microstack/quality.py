"""Image quality metrics: PSNR, SSIM, and a no-reference scorer built on
natural-scene statistics (MSCN coefficients with GGD/AGGD moment fits).

The no-reference score is the Mahalanobis distance of an image's 36-entry
feature vector from a pristine corpus distribution: 0 at the corpus mean,
larger is worse. See docs/brisque-format.md for the feature layout.
"""

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from microstack.imgcore import convolve2d, resize, to_grayscale

FEATURE_TAG = "mscn-ggd2-aggd4x4-scales2-v1"
N_FEATURES = 36

MSCN_C = 1.0 / 255.0

_ALPHA_GRID = np.arange(0.2, 10.0 + 1e-9, 1e-3)


def _gamma(x):
    return math.gamma(x)


def _build_tables():
    g1 = np.array([_gamma(1.0 / a) for a in _ALPHA_GRID])
    g2 = np.array([_gamma(2.0 / a) for a in _ALPHA_GRID])
    g3 = np.array([_gamma(3.0 / a) for a in _ALPHA_GRID])
    ggd_ratio = g1 * g3 / (g2 * g2)  # E[x^2] / (E|x|)^2 for a GGD
    aggd_ratio = (g2 * g2) / (g1 * g3)
    return ggd_ratio, aggd_ratio, g1, g2, g3


_GGD_RATIO, _AGGD_RATIO, _G1, _G2, _G3 = _build_tables()


def _gaussian_1d(size, sigma):
    ax = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    g = np.exp(-(ax**2) / (2.0 * sigma * sigma))
    return g / g.sum()


def psnr(a, b, peak=1.0):
    """10 log10(peak^2 / MSE) in dB; +inf for identical images."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    mse = float(((a - b) ** 2).mean())
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(peak * peak / mse)


def _filter_valid(plane, g1d):
    k = len(g1d)
    w2 = plane.shape[1] - k + 1
    tmp = np.zeros((plane.shape[0], w2), dtype=np.float64)
    for u in range(k):
        tmp += g1d[u] * plane[:, u : u + w2]
    h2 = plane.shape[0] - k + 1
    out = np.zeros((h2, w2), dtype=np.float64)
    for u in range(k):
        out += g1d[u] * tmp[u : u + h2, :]
    return out


def ssim(a, b, dynamic_range=1.0):
    """Mean structural similarity over sliding 11x11 Gaussian windows.

    Color images are compared on luma; only fully valid window positions
    contribute (no padding bias).
    """
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    ga = to_grayscale(a).astype(np.float64) if a.ndim == 3 else np.asarray(a, np.float64)
    gb = to_grayscale(b).astype(np.float64) if b.ndim == 3 else np.asarray(b, np.float64)
    win = 11
    if min(ga.shape) < win:
        raise ValueError(f"image {ga.shape} smaller than the {win}x{win} window")
    g = _gaussian_1d(win, 1.5)
    c1 = (0.01 * dynamic_range) ** 2
    c2 = (0.03 * dynamic_range) ** 2
    mu_a = _filter_valid(ga, g)
    mu_b = _filter_valid(gb, g)
    e_aa = _filter_valid(ga * ga, g)
    e_bb = _filter_valid(gb * gb, g)
    e_ab = _filter_valid(ga * gb, g)
    var_a = e_aa - mu_a * mu_a
    var_b = e_bb - mu_b * mu_b
    cov = e_ab - mu_a * mu_b
    num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
    den = (mu_a**2 + mu_b**2 + c1) * (var_a + var_b + c2)
    return float((num / den).mean())


def mscn(img_gray):
    """Mean-subtracted contrast-normalized coefficients.

    Local stats use a 7x7 Gaussian (sigma 7/6), reflect padding; the
    stabilizer is 1/255 to match 8-bit conventions on [0, 1] data.
    """
    if img_gray.ndim != 2:
        raise ValueError(f"expected a single-channel image, got {img_gray.shape}")
    if min(img_gray.shape) < 7:
        raise ValueError(f"image {img_gray.shape} smaller than the 7x7 window")
    g1 = _gaussian_1d(7, 7.0 / 6.0)
    ker = np.outer(g1, g1)
    x = np.asarray(img_gray, dtype=np.float64)
    mu = convolve2d(x, ker, padding="reflect")
    ex2 = convolve2d(x * x, ker, padding="reflect")
    sigma = np.sqrt(np.abs(ex2 - mu * mu))
    return (x - mu) / (sigma + MSCN_C)


def fit_ggd(samples):
    """Moment-matched generalized Gaussian: returns (alpha, sigma2)."""
    x = np.asarray(samples, dtype=np.float64).ravel()
    if x.size < 100:
        raise ValueError(f"need >= 100 samples, got {x.size}")
    e2 = float((x * x).mean())
    e1 = float(np.abs(x).mean())
    if e2 <= 0 or e1 <= 0:
        raise ValueError("degenerate variance")
    rho = e2 / (e1 * e1)
    alpha = float(_ALPHA_GRID[np.argmin(np.abs(_GGD_RATIO - rho))])
    return alpha, e2


def fit_aggd(samples):
    """Moment-matched asymmetric GGD: returns (eta, nu, sigma_l2, sigma_r2)."""
    x = np.asarray(samples, dtype=np.float64).ravel()
    if x.size < 100:
        raise ValueError(f"need >= 100 samples, got {x.size}")
    neg = x[x < 0]
    pos = x[x > 0]
    if neg.size == 0 or pos.size == 0:
        raise ValueError("degenerate variance: samples all one-signed")
    sigma_l = math.sqrt(float((neg * neg).mean()))
    sigma_r = math.sqrt(float((pos * pos).mean()))
    if sigma_l == 0 or sigma_r == 0:
        raise ValueError("degenerate variance")
    gamma_hat = sigma_l / sigma_r
    e_abs = float(np.abs(x).mean())
    e2 = float((x * x).mean())
    r_hat = (e_abs * e_abs) / e2
    r_norm = r_hat * (gamma_hat**3 + 1.0) * (gamma_hat + 1.0) / (gamma_hat**2 + 1.0) ** 2
    i = int(np.argmin((_AGGD_RATIO - r_norm) ** 2))
    nu = float(_ALPHA_GRID[i])
    eta = (sigma_r - sigma_l) * (_G2[i] / _G1[i]) * math.sqrt(_G1[i] / _G3[i])
    return eta, nu, sigma_l**2, sigma_r**2


def _paired_products(m):
    return (
        m[:, :-1] * m[:, 1:],  # horizontal
        m[:-1, :] * m[1:, :],  # vertical
        m[:-1, :-1] * m[1:, 1:],  # main diagonal
        m[:-1, 1:] * m[1:, :-1],  # anti diagonal
    )


def brisque_features(img):
    """36 natural-scene-statistics features over two scales.

    Per scale: GGD (alpha, sigma2) of the MSCN map, then AGGD
    (eta, nu, sigma_l2, sigma_r2) for the H, V, D1, D2 neighbor products.
    """
    gray = to_grayscale(np.asarray(img)) if img.ndim == 3 else np.asarray(img)
    if min(gray.shape) < 32:
        raise ValueError(f"image {gray.shape} smaller than 32 px")
    feats = []
    plane = gray.astype(np.float64)
    for scale in range(2):
        if scale == 1:
            plane = resize(plane, plane.shape[0] // 2, plane.shape[1] // 2, "bilinear")
        m = mscn(plane)
        feats.extend(fit_ggd(m))
        for prod in _paired_products(m):
            feats.extend(fit_aggd(prod))
    out = np.asarray(feats, dtype=np.float64)
    if out.shape != (N_FEATURES,) or not np.all(np.isfinite(out)):
        raise ValueError("feature extraction produced an invalid vector")
    return out


@dataclass
class PristineModel:
    mean: np.ndarray  # (36,)
    covariance: np.ndarray  # (36, 36), regularized
    lam: float
    feature_tag: str = FEATURE_TAG


def fit_pristine(corpus, lam=1e-3) -> PristineModel:
    """Mean and regularized covariance of corpus features."""
    corpus = list(corpus)
    if len(corpus) < 20:
        raise ValueError(f"pristine corpus needs >= 20 images, got {len(corpus)}")
    feats = np.stack([brisque_features(img) for img in corpus])
    mean = feats.mean(axis=0)
    cov = np.cov(feats, rowvar=False) + lam * np.eye(N_FEATURES)
    try:
        np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        raise ValueError("covariance not positive definite despite regularization")
    return PristineModel(mean=mean, covariance=cov, lam=lam)


def brisque_score(img, model: PristineModel):
    """Mahalanobis distance of the image's features from the pristine model."""
    if model.feature_tag != FEATURE_TAG:
        raise ValueError(
            f"pristine model feature tag {model.feature_tag!r} does not match "
            f"this build ({FEATURE_TAG!r})"
        )
    d = brisque_features(img) - model.mean
    sol = np.linalg.solve(model.covariance, d)
    return float(math.sqrt(max(float(d @ sol), 0.0)))


def save_pristine(model: PristineModel, path):
    payload = {
        "feature_tag": model.feature_tag,
        "lambda": model.lam,
        "mean": model.mean.tolist(),
        "covariance": model.covariance.tolist(),
    }
    Path(path).write_text(json.dumps(payload))


def load_pristine(path) -> PristineModel:
    payload = json.loads(Path(path).read_text())
    model = PristineModel(
        mean=np.asarray(payload["mean"], dtype=np.float64),
        covariance=np.asarray(payload["covariance"], dtype=np.float64),
        lam=float(payload["lambda"]),
        feature_tag=payload.get("feature_tag", ""),
    )
    if model.mean.shape != (N_FEATURES,) or model.covariance.shape != (N_FEATURES, N_FEATURES):
        raise ValueError(f"malformed pristine model in {path}")
    return model
