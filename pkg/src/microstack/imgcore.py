"""Image containers and pixel-level primitives.

Images are numpy float32 arrays in [0, 1]: (H, W) for grayscale, (H, W, 3)
for color. A blur kernel is a small odd-sized square float array; the blur
families built here (gaussian, disk, airy, motion) are normalized to unit
mass. Binary masks are boolean (H, W) arrays.
"""

import math
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image as PILImage

from microstack import kernels

LUMA_WEIGHTS = (0.299, 0.587, 0.114)

# first two zeros of the Bessel function J1
_J1_ZERO1 = 3.8317059702075125
_J1_ZERO2 = 7.015586669815619

CROP_ATTEMPT_FACTOR = 100


def channels(img: np.ndarray) -> int:
    if img.ndim == 2:
        return 1
    if img.ndim == 3 and img.shape[2] == 3:
        return 3
    raise ValueError(f"expected (H, W) or (H, W, 3) image, got shape {img.shape}")


def validate_image(img: np.ndarray) -> np.ndarray:
    channels(img)
    if not np.all(np.isfinite(img)):
        raise ValueError("image contains non-finite samples")
    return img


@dataclass
class ZStack:
    """Ordered, co-registered frames; z_step is metadata and may be None."""

    frames: list
    z_step: float | None = None

    def __post_init__(self):
        if len(self.frames) < 1:
            raise ValueError("a stack needs at least one frame")
        shape = self.frames[0].shape
        for i, f in enumerate(self.frames):
            if f.shape != shape:
                raise ValueError(
                    f"mixed shapes: frame 0 is {shape}, frame {i} is {f.shape}"
                )

    def __len__(self):
        return len(self.frames)

    @property
    def shape(self):
        return self.frames[0].shape


def load_image(path) -> np.ndarray:
    """Load an 8-bit PNG/PGM/PPM file as float32 in [0, 1]."""
    path = Path(path)
    try:
        with PILImage.open(path) as im:
            if im.mode in ("L", "I", "I;16"):
                arr = np.asarray(im.convert("L"), dtype=np.float32)
            else:
                arr = np.asarray(im.convert("RGB"), dtype=np.float32)
    except (OSError, SyntaxError) as e:
        raise OSError(f"unreadable image file {path}: {e}") from e
    return np.clip(arr / 255.0, 0.0, 1.0).astype(np.float32)


def save_image(img, path):
    """Write an image as an 8-bit file; format follows the extension."""
    img = validate_image(img)
    data = np.clip(np.rint(np.asarray(img, dtype=np.float64) * 255.0), 0, 255)
    PILImage.fromarray(data.astype(np.uint8)).save(Path(path))


_INDEX_RE = re.compile(r"(\d+)")


def load_stack(directory_path, pattern="frame_*.*") -> ZStack:
    """Load every frame file matching `pattern`, ordered by numeric index."""
    directory = Path(directory_path)
    if not directory.is_dir():
        raise OSError(f"not a directory: {directory}")
    entries = []
    for p in sorted(directory.glob(pattern)):
        m = _INDEX_RE.search(p.stem)
        if m is None:
            continue
        entries.append((int(m.group(1)), p))
    if not entries:
        raise ValueError(f"no frames matching {pattern!r} in {directory}")
    entries.sort(key=lambda t: t[0])
    frames = []
    shape = None
    for _, p in entries:
        img = load_image(p)
        if shape is None:
            shape = img.shape
        elif img.shape != shape:
            raise ValueError(
                f"mixed shapes: {entries[0][1].name} is {shape}, "
                f"{p.name} is {img.shape}"
            )
        frames.append(img)
    return ZStack(frames)


def to_grayscale(img: np.ndarray) -> np.ndarray:
    """Luma conversion 0.299R + 0.587G + 0.114B; grayscale passes through."""
    if channels(img) == 1:
        return img
    r, g, b = LUMA_WEIGHTS
    out = r * img[:, :, 0] + g * img[:, :, 1] + b * img[:, :, 2]
    return out.astype(img.dtype, copy=False)


def _pad_plane(plane, pad, padding):
    if padding == "reflect":
        return np.pad(plane, pad, mode="reflect")
    if padding == "zero":
        return np.pad(plane, pad, mode="constant")
    raise ValueError(f"unknown padding {padding!r} (use 'reflect' or 'zero')")


def convolve2d(img, ker, padding="reflect"):
    """True 2-D convolution (correlation with the flipped kernel), same size.

    Per channel, with reflect or zero padding. The kernel must be odd-sized
    and strictly smaller than the image in both dimensions.
    """
    img = validate_image(img)
    ker = np.asarray(ker)
    k = ker.shape[0]
    if ker.ndim != 2 or ker.shape[1] != k:
        raise ValueError(f"kernel must be square, got {ker.shape}")
    if k % 2 == 0:
        raise ValueError(f"kernel size must be odd, got {k}")
    if k > img.shape[0] or k > img.shape[1]:
        raise ValueError(
            f"kernel {k}x{k} larger than image {img.shape[0]}x{img.shape[1]}"
        )
    kflip = np.ascontiguousarray(ker[::-1, ::-1]).astype(img.dtype)
    pad = k // 2
    if img.ndim == 2:
        padded = _pad_plane(img, pad, padding)
        return kernels.convolve2d_exact(padded, kflip)
    out = np.empty_like(img)
    for c in range(img.shape[2]):
        padded = _pad_plane(img[:, :, c], pad, padding)
        out[:, :, c] = kernels.convolve2d_exact(padded, kflip)
    return out


def _normalize(ker):
    s = ker.sum()
    if s <= 0:
        raise ValueError("kernel has non-positive mass")
    return ker / s


def gaussian_kernel(sigma) -> np.ndarray:
    """Isotropic Gaussian, truncated at 3 sigma and renormalized."""
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    r = int(math.ceil(3.0 * sigma))
    ax = np.arange(-r, r + 1, dtype=np.float64)
    g1 = np.exp(-(ax**2) / (2.0 * sigma * sigma))
    return _normalize(np.outer(g1, g1))


def disk_kernel(radius) -> np.ndarray:
    """Uniform pillbox of the given pixel radius; radius 0 is the identity."""
    if radius < 0:
        raise ValueError(f"radius must be non-negative, got {radius}")
    r = int(math.ceil(radius))
    if r == 0:
        return np.ones((1, 1), dtype=np.float64)
    ax = np.arange(-r, r + 1, dtype=np.float64)
    yy, xx = np.meshgrid(ax, ax, indexing="ij")
    ker = (yy**2 + xx**2 <= radius * radius + 1e-12).astype(np.float64)
    return _normalize(ker)


def bessel_j1(x):
    """J1: power series below 8, Abramowitz & Stegun asymptotic form above."""
    x = np.asarray(x, dtype=np.float64)
    ax = np.abs(x)
    small = ax < 8.0

    # sum_k (-1)^k (x/2)^(2k+1) / (k! (k+1)!); converges fast for |x| < 8
    xs = np.where(small, x, 0.0)
    q = -0.25 * xs * xs
    term = 0.5 * xs
    series = term.copy()
    for k in range(1, 40):
        term = term * q / (k * (k + 1))
        series += term
    out = series

    xl = np.where(small, 8.0, ax)
    z = 8.0 / xl
    y2 = z * z
    xx = xl - 2.356194491
    p2 = 1.0 + y2 * (
        0.183105e-2 + y2 * (-0.3516396496e-4 + y2 * (0.2457520174e-5 + y2 * -0.240337019e-6))
    )
    q2 = 0.04687499995 + y2 * (
        -0.2002690873e-3 + y2 * (0.8449199096e-5 + y2 * (-0.88228987e-6 + y2 * 0.105787412e-6))
    )
    big = np.sqrt(0.636619772 / xl) * (np.cos(xx) * p2 - z * np.sin(xx) * q2)
    big = big * np.sign(np.where(small, 1.0, x))
    out = np.where(small, out, big)
    return out


def airy_kernel(radius) -> np.ndarray:
    """Diffraction (Airy) intensity pattern with its first zero at `radius` px.

    Taps are [2 J1(x)/x]^2 with x scaled so the first J1 zero lands at the
    requested pixel radius; support is truncated past the second dark ring.
    """
    if radius < 0:
        raise ValueError(f"radius must be non-negative, got {radius}")
    if radius == 0:
        return np.ones((1, 1), dtype=np.float64)
    support = int(math.ceil(radius * _J1_ZERO2 / _J1_ZERO1))
    ax = np.arange(-support, support + 1, dtype=np.float64)
    yy, xx = np.meshgrid(ax, ax, indexing="ij")
    r_pix = np.sqrt(yy**2 + xx**2)
    x = r_pix * (_J1_ZERO1 / radius)
    with np.errstate(invalid="ignore", divide="ignore"):
        amp = np.where(x > 0, 2.0 * bessel_j1(x) / np.where(x > 0, x, 1.0), 1.0)
    ker = amp * amp
    ker[r_pix > support] = 0.0
    return _normalize(ker)


def motion_kernel(length, angle_deg) -> np.ndarray:
    """Unit-mass line segment of `length` taps splatted at `angle_deg`."""
    length = int(length)
    if length < 1:
        raise ValueError(f"length must be >= 1, got {length}")
    half = int(math.ceil((length - 1) / 2.0))
    size = 2 * half + 1
    ker = np.zeros((size, size), dtype=np.float64)
    theta = math.radians(angle_deg)
    c, s = math.cos(theta), math.sin(theta)
    mass = 1.0 / length
    for t in range(length):
        d = t - (length - 1) / 2.0
        x = d * c
        y = d * s
        x0, y0 = math.floor(x), math.floor(y)
        fx, fy = x - x0, y - y0
        for oy, wy in ((0, 1.0 - fy), (1, fy)):
            for ox, wx in ((0, 1.0 - fx), (1, fx)):
                w = wy * wx
                if w > 0:
                    ker[half + y0 + oy, half + x0 + ox] += mass * w
    return _normalize(ker)


def resize(img, new_h, new_w, mode="bilinear"):
    """Resample to (new_h, new_w); nearest or separable bilinear with
    half-pixel centers."""
    img = validate_image(img)
    if new_h < 1 or new_w < 1:
        raise ValueError(f"target dimensions must be >= 1, got {new_h}x{new_w}")
    h, w = img.shape[:2]
    if (new_h, new_w) == (h, w):
        return img.copy()
    if mode == "nearest":
        ys = np.minimum((((np.arange(new_h) + 0.5) * h / new_h)).astype(np.intp), h - 1)
        xs = np.minimum((((np.arange(new_w) + 0.5) * w / new_w)).astype(np.intp), w - 1)
        return np.ascontiguousarray(img[np.ix_(ys, xs)])
    if mode != "bilinear":
        raise ValueError(f"unknown resize mode {mode!r}")
    sy = (np.arange(new_h) + 0.5) * (h / new_h) - 0.5
    sx = (np.arange(new_w) + 0.5) * (w / new_w) - 0.5
    sy = np.clip(sy, 0.0, h - 1.0)
    sx = np.clip(sx, 0.0, w - 1.0)
    y0 = np.minimum(sy.astype(np.intp), h - 2) if h > 1 else np.zeros(new_h, np.intp)
    x0 = np.minimum(sx.astype(np.intp), w - 2) if w > 1 else np.zeros(new_w, np.intp)
    wy = (sy - y0).astype(np.float64)
    wx = (sx - x0).astype(np.float64)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    work = img.astype(np.float64, copy=False)
    # rows first, then columns (separable)
    top = work[y0]
    bot = work[y1]
    if img.ndim == 3:
        rows = top * (1.0 - wy)[:, None, None] + bot * wy[:, None, None]
        out = (
            rows[:, x0] * (1.0 - wx)[None, :, None]
            + rows[:, x1] * wx[None, :, None]
        )
    else:
        rows = top * (1.0 - wy)[:, None] + bot * wy[:, None]
        out = rows[:, x0] * (1.0 - wx)[None, :] + rows[:, x1] * wx[None, :]
    return out.astype(img.dtype, copy=False)


def foreground_mask(img, threshold=0.05) -> np.ndarray:
    """Boolean mask of pixels whose luma exceeds `threshold`.

    Intended to exclude the black circular surround of microscope frames.
    """
    return to_grayscale(validate_image(img)) > threshold


def save_mask(mask, path):
    PILImage.fromarray((mask.astype(np.uint8) * 255)).save(Path(path))


def load_mask(path) -> np.ndarray:
    return load_image(path) > 0.5


def sample_crops(img, mask, crop_size, count, min_fg_fraction, rng_seed):
    """Rejection-sample `count` square crops with enough foreground.

    Deterministic in `rng_seed`; gives up after 100x `count` attempts when
    the mask cannot supply the requested foreground fraction.
    """
    img = validate_image(img)
    h, w = img.shape[:2]
    if crop_size > min(h, w):
        raise ValueError(f"crop_size {crop_size} exceeds image {h}x{w}")
    if not 0.0 <= min_fg_fraction <= 1.0:
        raise ValueError(f"min_fg_fraction must be in [0, 1], got {min_fg_fraction}")
    if mask.shape != (h, w):
        raise ValueError(f"mask shape {mask.shape} does not match image {h}x{w}")
    rng = np.random.default_rng(rng_seed)
    budget = CROP_ATTEMPT_FACTOR * count
    crops = []
    attempts = 0
    while len(crops) < count:
        if attempts >= budget:
            raise RuntimeError(
                f"crop sampling budget exhausted after {budget} attempts "
                f"({len(crops)}/{count} accepted); image too dark for "
                f"min_fg_fraction={min_fg_fraction}"
            )
        attempts += 1
        y = int(rng.integers(0, h - crop_size + 1))
        x = int(rng.integers(0, w - crop_size + 1))
        window = mask[y : y + crop_size, x : x + crop_size]
        if window.mean() >= min_fg_fraction:
            crops.append(np.ascontiguousarray(img[y : y + crop_size, x : x + crop_size]))
    return crops
