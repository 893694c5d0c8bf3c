"""Fast-scan deblurring: synthetic blur pairs, a small convolutional
restorer, tiled inference, and the checkerboard upsampler diagnostic.

Blur pairs are synthesized from sharp frames with a recorded recipe so the
restorer can be trained and scored against known ground truth.
"""

from dataclasses import dataclass

import numpy as np

from microstack import kernels, nn
from microstack.imgcore import convolve2d, disk_kernel, gaussian_kernel, motion_kernel
from microstack.nn.augment import apply_flip_rot, draw_flip_rot


@dataclass(frozen=True)
class BlurRecipe:
    """Which kernels to draw and their parameter ranges."""

    kinds: tuple = ("motion", "gaussian")
    motion_length: tuple = (3, 9)
    motion_angle: tuple = (0.0, 360.0)
    gaussian_sigma: tuple = (0.5, 2.0)
    disk_radius: tuple = (0.0, 2.0)
    noise_sigma: float = 0.01

    def draw_kernel(self, rng):
        kind = self.kinds[int(rng.integers(0, len(self.kinds)))]
        if kind == "motion":
            lo, hi = self.motion_length
            length = int(rng.integers(lo, hi + 1))
            angle = float(rng.uniform(*self.motion_angle))
            return motion_kernel(length, angle)
        if kind == "gaussian":
            return gaussian_kernel(float(rng.uniform(*self.gaussian_sigma)))
        if kind == "disk":
            return disk_kernel(float(rng.uniform(*self.disk_radius)))
        raise ValueError(f"unknown blur kind {kind!r}")


@dataclass
class BlurPairSet:
    blurred: list
    sharp: list
    recipe: BlurRecipe
    seed: int

    def __post_init__(self):
        if len(self.blurred) != len(self.sharp):
            raise ValueError("blurred/sharp lengths differ")
        for b, s in zip(self.blurred, self.sharp):
            if b.shape != s.shape:
                raise ValueError(f"pair shape mismatch: {b.shape} vs {s.shape}")

    def __len__(self):
        return len(self.blurred)


@dataclass
class DeblurConfig:
    """Desk-scale defaults; the published run (256px patches, 450 epochs)
    stays reachable through the fields."""

    patch_size: int = 64
    epochs: int = 100
    lr: float = 1e-3
    batch_size: int = 4
    patches_per_pair: int = 4  # random patches drawn from each pair per epoch
    seed: int = 0

    def validate(self):
        if self.patch_size < 32:
            raise ValueError(f"patch_size must be >= 32, got {self.patch_size}")
        if self.lr <= 0:
            raise ValueError(f"lr must be positive, got {self.lr}")
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.patches_per_pair < 1:
            raise ValueError(f"patches_per_pair must be >= 1, got {self.patches_per_pair}")
        return self


def make_blur_pairs(sharp_frames, recipe: BlurRecipe, count, seed=0) -> BlurPairSet:
    """Draw `count` (blurred, sharp) pairs; kernel and noise drawn per pair."""
    sharp_frames = list(sharp_frames)
    if not sharp_frames:
        raise ValueError("need at least one sharp frame")
    rng = np.random.default_rng(seed)
    blurred, sharp = [], []
    for i in range(count):
        frame = sharp_frames[i % len(sharp_frames)]
        ker = recipe.draw_kernel(rng)
        out = frame.copy() if ker.shape == (1, 1) else convolve2d(frame, ker, "reflect")
        if recipe.noise_sigma > 0:
            out = out + rng.normal(0.0, recipe.noise_sigma, size=out.shape)
        blurred.append(np.clip(out, 0.0, 1.0).astype(np.float32))
        sharp.append(frame)
    return BlurPairSet(blurred, sharp, recipe, seed)


def build_srcnn(seed=0, dtype=np.float32, identity_init=False) -> nn.Network:
    """Three convolutions with two ReLUs between; fully convolutional."""
    specs = [
        nn.conv2d(3, 64, 9),
        nn.relu(),
        nn.conv2d(64, 32, 1),
        nn.relu(),
        nn.conv2d(32, 3, 5),
    ]
    net = nn.Network(specs, seed=seed, dtype=dtype)
    if identity_init:
        for spec, group in zip(net.specs, net.params):
            if spec.kind != "conv2d":
                continue
            w = group[0].data
            w[:] = 0
            c = spec.kernel_size // 2
            for ch in range(min(spec.in_channels, spec.out_channels)):
                w[ch, ch, c, c] = 1
            group[1].data[:] = 0
    return net


def _as_rgb(img):
    if img.ndim == 2:
        return np.repeat(img[:, :, None], 3, axis=2), True
    return img, False


def _to_chw(img):
    return np.ascontiguousarray(np.asarray(img, dtype=np.float32).transpose(2, 0, 1))


def _from_chw(arr):
    return np.ascontiguousarray(arr.transpose(1, 2, 0))


def train_deblur(pairs: BlurPairSet, config: DeblurConfig):
    """MSE on random augmented patches with Adam; returns (net, loss log)."""
    config.validate()
    if len(pairs) == 0:
        raise ValueError("empty pair set")
    ps = config.patch_size
    for b in pairs.blurred:
        if b.shape[0] < ps or b.shape[1] < ps:
            raise ValueError(f"frame {b.shape} smaller than patch size {ps}")
    net = build_srcnn(seed=config.seed)
    params = net.flat_params()
    opt = nn.AdamState.for_params(params, lr=config.lr)
    rng = np.random.default_rng(config.seed)
    n = len(pairs)
    log = []
    for _ in range(config.epochs):
        # one patch per pair per round, pairs reshuffled each round
        plan = np.concatenate([rng.permutation(n) for _ in range(config.patches_per_pair)])
        total = 0.0
        for start in range(0, len(plan), config.batch_size):
            idx = plan[start : start + config.batch_size]
            xs, ys = [], []
            for j in idx:
                blurred, sharp = pairs.blurred[j], pairs.sharp[j]
                oy = int(rng.integers(0, blurred.shape[0] - ps + 1))
                ox = int(rng.integers(0, blurred.shape[1] - ps + 1))
                hflip, vflip, rot_k = draw_flip_rot(rng)
                bp = apply_flip_rot(blurred[oy : oy + ps, ox : ox + ps], hflip, vflip, rot_k)
                sp = apply_flip_rot(sharp[oy : oy + ps, ox : ox + ps], hflip, vflip, rot_k)
                xs.append(_to_chw(bp))
                ys.append(_to_chw(sp))
            xb = np.stack(xs)
            yb = np.stack(ys)
            pred, caches = net.forward_train(xb)
            value, dpred = nn.loss_mse(pred, yb)
            grads, _ = net.backward(caches, dpred, input_grad=False)
            opt.step(params, [g for gr in grads for g in gr])
            total += value * len(idx)
        log.append(total / len(plan))
    return net, log


def pairs_loss(net, pairs: BlurPairSet):
    """Mean full-frame MSE of the raw network output over the pair set."""
    total = 0.0
    for blurred, sharp in zip(pairs.blurred, pairs.sharp):
        pred = net.forward(_to_chw(blurred)[None])[0]
        value, _ = nn.loss_mse(pred, _to_chw(sharp))
        total += value
    return total / len(pairs)


def restore(net, img):
    """Single forward pass over a whole image, clamped to [0, 1]."""
    rgb, was_gray = _as_rgb(img)
    out = net.forward(_to_chw(rgb)[None])[0]
    out = np.clip(_from_chw(out), 0.0, 1.0).astype(np.float32)
    return out.mean(axis=2).astype(np.float32) if was_gray else out


def _feather_profile(length, overlap):
    ramp = np.minimum(np.arange(1, length + 1), np.arange(length, 0, -1))
    return np.minimum(ramp, overlap) / float(overlap)


def deblur_image(net, img, tile=256, overlap=16):
    """Tiled restoration with linear feather blending in the overlaps.

    Images no larger than `tile` are processed in one pass.
    """
    h, w = img.shape[:2]
    if h <= tile and w <= tile:
        return restore(net, img)
    rgb, was_gray = _as_rgb(img)
    th, tw = min(tile, h), min(tile, w)
    ys = sorted(set(range(0, h - th, th - overlap)) | {h - th})
    xs = sorted(set(range(0, w - tw, tw - overlap)) | {w - tw})
    acc = np.zeros((h, w, 3), dtype=np.float64)
    wsum = np.zeros((h, w, 1), dtype=np.float64)
    wy = _feather_profile(th, overlap)
    wx = _feather_profile(tw, overlap)
    weight = np.outer(wy, wx)[:, :, None]
    for y0 in ys:
        for x0 in xs:
            out = restore(net, rgb[y0 : y0 + th, x0 : x0 + tw])
            acc[y0 : y0 + th, x0 : x0 + tw] += out * weight
            wsum[y0 : y0 + th, x0 : x0 + tw] += weight
    out = np.clip(acc / wsum, 0.0, 1.0).astype(np.float32)
    return out.mean(axis=2).astype(np.float32) if was_gray else out


def _transposed_conv2_stride2(x, w):
    """Full stride-2 transposed convolution, (Ci, H, W) -> (Co, 2H+k-2, ...)."""
    h, wd = x.shape[1], x.shape[2]
    co, _, k, _ = w.shape
    out = np.zeros((co, 2 * h + k - 2, 2 * wd + k - 2), dtype=np.float64)
    for dy in range(k):
        for dx in range(k):
            tap = np.tensordot(w[:, :, dy, dx], x, axes=([1], [0]))
            out[:, dy : dy + 2 * h : 2, dx : dx + 2 * wd : 2] += tap
    return out


def checkerboard_diagnostic(upsampler, seed=0, size=16, channels=3, kernel_size=3,
                            weights=None):
    """Per-channel spatial variance of an upsampling layer fed a constant.

    `upsampler` is "resize_convolution" (nearest upsample then conv) or
    "transposed_conv_stride2". Random taps, seeded, unless `weights` given.
    """
    rng = np.random.default_rng(seed)
    if weights is None:
        weights = rng.standard_normal((channels, channels, kernel_size, kernel_size)) * 0.1
    weights = np.ascontiguousarray(weights, dtype=np.float64)
    x = np.full((channels, size, size), 0.5, dtype=np.float64)
    if upsampler == "resize_convolution":
        up = np.repeat(np.repeat(x, 2, axis=1), 2, axis=2)
        p = kernel_size // 2
        xpad = np.pad(up[None], ((0, 0), (0, 0), (p, p), (p, p)), mode="reflect")
        out = kernels.conv_fwd(
            np.ascontiguousarray(xpad), weights, np.zeros(channels, dtype=np.float64)
        )[0]
    elif upsampler == "transposed_conv_stride2":
        out = _transposed_conv2_stride2(x, weights)
    else:
        raise ValueError(f"unknown upsampler {upsampler!r}")
    return out.reshape(out.shape[0], -1).var(axis=1)
