"""Synthetic specimen frames, z-stacks and blur pairs.

Stand-ins for real microscope captures: blobs, filaments and fine speckle
give sharpness operators and the defocus classifier actual high-frequency
content to work with. `make_specimen` adds the bright circular field on a
black surround typical of microscope frames; `make_texture` fills the whole
frame (useful when flat borders would dilute a measurement). Everything is
a pure function of its seed.
"""

import numpy as np

from microstack.imgcore import ZStack, airy_kernel, convolve2d, disk_kernel, gaussian_kernel, resize


def _octave_noise(height, width, rng):
    """Noise with energy in several frequency octaves.

    Each blur radius suppresses a different band, so defocus level stays
    readable from local statistics alone on any specimen.
    """
    fine = rng.normal(0.0, 0.09, size=(height, width))
    mid = resize(rng.normal(0.0, 0.22, size=(height // 3 + 1, width // 3 + 1)),
                 height, width, "bilinear")
    coarse = resize(rng.normal(0.0, 0.3, size=(height // 8 + 1, width // 8 + 1)),
                    height, width, "bilinear")
    return fine + 0.55 * mid + 0.35 * coarse


def _render_content(height, width, rng):
    yy, xx = np.mgrid[0:height, 0:width].astype(np.float64)
    cy, cx = height / 2.0, width / 2.0
    spread = 0.46 * min(height, width)

    base = 0.45 + 0.12 * np.sin(2.0 * np.pi * (xx / width + rng.random())) * np.cos(
        2.0 * np.pi * (yy / height + rng.random())
    )
    img = np.repeat(base[:, :, None], 3, axis=2)

    n_blobs = int(rng.integers(12, 22))
    for _ in range(n_blobs):
        by = cy + (rng.random() - 0.5) * 1.8 * spread
        bx = cx + (rng.random() - 0.5) * 1.8 * spread
        r = rng.uniform(3.0, 14.0)
        amp = rng.uniform(0.15, 0.35) * (1 if rng.random() < 0.5 else -1)
        tint = 1.0 + 0.25 * (rng.random(3) - 0.5)
        splat = np.exp(-((yy - by) ** 2 + (xx - bx) ** 2) / (2.0 * r * r))
        img += amp * splat[:, :, None] * tint[None, None, :]

    n_fil = int(rng.integers(4, 9))
    for _ in range(n_fil):
        y0 = cy + (rng.random() - 0.5) * 1.6 * spread
        x0 = cx + (rng.random() - 0.5) * 1.6 * spread
        ang = rng.random() * np.pi
        length = rng.uniform(0.3, 1.2) * spread
        y1 = y0 + length * np.sin(ang)
        x1 = x0 + length * np.cos(ang)
        amp = rng.uniform(0.2, 0.4) * (1 if rng.random() < 0.5 else -1)
        width_px = rng.uniform(0.8, 2.0)
        # distance from each pixel to the segment
        vy, vx = y1 - y0, x1 - x0
        norm2 = vy * vy + vx * vx + 1e-12
        t = np.clip(((yy - y0) * vy + (xx - x0) * vx) / norm2, 0.0, 1.0)
        d2 = (yy - (y0 + t * vy)) ** 2 + (xx - (x0 + t * vx)) ** 2
        img += amp * np.exp(-d2 / (2.0 * width_px**2))[:, :, None]

    luma_noise = _octave_noise(height, width, rng)
    chroma_noise = rng.normal(0.0, 0.02, size=(height, width, 3))
    img += luma_noise[:, :, None] + chroma_noise
    return img


def make_specimen(height=256, width=256, seed=0):
    """Synthetic microscope frame: textured circular field, black surround."""
    rng = np.random.default_rng(seed)
    img = _render_content(height, width, rng)
    yy, xx = np.mgrid[0:height, 0:width].astype(np.float64)
    field_r = 0.46 * min(height, width)
    inside = ((yy - height / 2.0) ** 2 + (xx - width / 2.0) ** 2) <= field_r**2
    img = np.where(inside[:, :, None], img, 0.01)
    return np.clip(img, 0.0, 1.0).astype(np.float32)


def make_texture(height=192, width=192, seed=0):
    """Edge-to-edge textured frame (no dark surround)."""
    rng = np.random.default_rng(seed)
    return np.clip(_render_content(height, width, rng), 0.0, 1.0).astype(np.float32)


def make_bandlimited_texture(height=192, width=192, seed=0, cutoff_sigma=0.7):
    """Texture without irrecoverable pixel-level noise.

    Restoration targets need this: iid per-pixel noise in the reference puts
    a floor under the achievable MSE that no deblurrer can cross.
    """
    return convolve2d(make_texture(height, width, seed),
                      gaussian_kernel(cutoff_sigma), padding="reflect")


def blur_ladder_kernel(family, radius):
    """Blur kernel for a defocus ladder step; radius 0 means identity."""
    if radius <= 0:
        return None
    if family == "gaussian":
        return gaussian_kernel(radius)
    if family == "disk":
        return disk_kernel(radius)
    if family == "airy":
        return airy_kernel(radius)
    raise ValueError(f"unknown blur family {family!r}")


def blur_frame(img, family, radius):
    ker = blur_ladder_kernel(family, radius)
    if ker is None:
        return img.copy()
    return convolve2d(img, ker, padding="reflect")


def make_zstack(height=256, width=256, n_frames=10, seed=0, sharpest_index=0,
                step=0.8, family="gaussian"):
    """Stack whose frame i carries blur radius |i - sharpest_index| * step."""
    sharp = make_specimen(height, width, seed)
    frames = [
        blur_frame(sharp, family, abs(i - sharpest_index) * step)
        for i in range(n_frames)
    ]
    return ZStack(frames)


def make_complementary_stack(height=160, width=160, n_bands=2, seed=0,
                             sigma=2.0, axis=1):
    """Frames sharp in one band each, blurred elsewhere; returns (stack, truth).

    Frames are edge-to-edge texture and the union of the sharp bands is the
    whole frame, so `truth` is a real all-in-focus reference for the fusion.
    """
    truth = make_texture(height, width, seed)
    blurred = convolve2d(truth, gaussian_kernel(sigma), padding="reflect")
    extent = truth.shape[axis]
    edges = np.linspace(0, extent, n_bands + 1).astype(int)
    frames = []
    coord = np.arange(extent)
    for i in range(n_bands):
        in_band = (coord >= edges[i]) & (coord < edges[i + 1])
        sel = in_band[None, :, None] if axis == 1 else in_band[:, None, None]
        frames.append(np.where(sel, truth, blurred).astype(np.float32))
    return ZStack(frames), truth


def make_clean_corpus(count, height=192, width=192, seed=0):
    """Independent clean textured frames (for pristine-statistics fitting)."""
    base = np.random.SeedSequence(seed).generate_state(count)
    return [make_texture(height, width, int(s)) for s in base]
