"""Training-time image augmentation: flips plus right-angle rotation."""

import numpy as np


def apply_flip_rot(img, hflip, vflip, rot_k):
    """Apply h-flip, then v-flip, then rot_k 90-degree CCW rotations."""
    out = img
    if hflip:
        out = out[:, ::-1]
    if vflip:
        out = out[::-1, :]
    if rot_k % 4:
        out = np.rot90(out, k=rot_k % 4, axes=(0, 1))
    return np.ascontiguousarray(out)


def draw_flip_rot(rng):
    """Draw augmentation parameters: independent 50% flips, uniform rotation."""
    hflip = bool(rng.random() < 0.5)
    vflip = bool(rng.random() < 0.5)
    rot_k = int(rng.integers(0, 4))
    return hflip, vflip, rot_k


def augment(img, rng):
    """Randomly flipped/rotated copy; deterministic given the generator state."""
    return apply_flip_rot(img, *draw_flip_rot(rng))
