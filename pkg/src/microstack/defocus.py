"""Defocus-level classifier: dataset construction, training, frame decisions.

Crops are 84x84 RGB; levels are ordinal defocus classes with 0 = sharpest.
A frame counts as in focus when its sharpest sampled crop (minimum expected
level) stays at or below the level threshold, so small focused areas are
never lost to whole-frame averaging.
"""

import math
from dataclasses import dataclass

import numpy as np

from microstack import nn
from microstack.imgcore import ZStack, foreground_mask, sample_crops
from microstack.synth import blur_frame

CROP_SIZE = 84


@dataclass
class DefocusDataset:
    crops: np.ndarray  # (N, 84, 84, 3) float32
    levels: np.ndarray  # (N,) int
    k_levels: int
    provenance: str  # "real_zstack" | "synthetic_psf"
    seed: int

    def __post_init__(self):
        if self.crops.shape[1:] != (CROP_SIZE, CROP_SIZE, 3):
            raise ValueError(f"crops must be (N, 84, 84, 3), got {self.crops.shape}")
        if len(self.levels) != len(self.crops):
            raise ValueError("levels and crops lengths differ")
        if self.levels.min() < 0 or self.levels.max() >= self.k_levels:
            raise ValueError("level outside [0, k_levels)")

    def __len__(self):
        return len(self.crops)


@dataclass
class ClassifierConfig:
    """Desk-scale defaults; the published settings (1500 epochs at lr 1e-6,
    10 levels, batch 8) remain reachable by setting the fields explicitly."""

    k_levels: int = 10
    epochs: int = 100
    lr: float = 1e-3
    batch_size: int = 8
    loss: str = "cross_entropy"  # or "rps"
    seed: int = 0

    def validate(self):
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.lr <= 0:
            raise ValueError(f"lr must be positive, got {self.lr}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.loss not in ("cross_entropy", "rps"):
            raise ValueError(f"loss must be cross_entropy or rps, got {self.loss!r}")
        return self


def default_level_threshold(k_levels):
    return (k_levels - 1) / 4.0


def _split_counts(total, parts):
    base, rem = divmod(total, parts)
    return [base + (1 if i < rem else 0) for i in range(parts)]


def build_synthetic_dataset(sharp_images, k_levels, crops_per_level, blur_family="gaussian",
                            seed=0, level_step=0.8, fg_threshold=0.05, min_fg_fraction=0.5):
    """Blur-ladder dataset: level k crops come from the level-k blurred copy.

    Crop positions are rejection-sampled against the sharp image's
    foreground mask, independently per (image, level).
    """
    sharp_images = list(sharp_images)
    if not sharp_images:
        raise ValueError("need at least one sharp image")
    if k_levels < 2:
        raise ValueError(f"k_levels must be >= 2, got {k_levels}")
    seeds = np.random.SeedSequence(seed).generate_state(len(sharp_images) * k_levels * 2)
    crops, levels = [], []
    for level in range(k_levels):
        counts = _split_counts(crops_per_level, len(sharp_images))
        for i, img in enumerate(sharp_images):
            if counts[i] == 0:
                continue
            blurred = blur_frame(img, blur_family, level * level_step)
            mask = foreground_mask(img, fg_threshold)
            crop_seed = int(seeds[(i * k_levels + level) * 2])
            for crop in sample_crops(blurred, mask, CROP_SIZE, counts[i],
                                     min_fg_fraction, crop_seed):
                crops.append(crop)
                levels.append(level)
    return DefocusDataset(
        crops=np.stack(crops).astype(np.float32),
        levels=np.asarray(levels, dtype=np.intp),
        k_levels=k_levels,
        provenance="synthetic_psf",
        seed=seed,
    )


def build_zstack_dataset(stack: ZStack, sharpest_index, k_levels, step_frames,
                         crops_per_level, seed=0, fg_threshold=0.05, min_fg_fraction=0.5):
    """Level k crops come from frame sharpest_index + k * step_frames."""
    if not 0 <= sharpest_index < len(stack):
        raise ValueError(f"sharpest_index {sharpest_index} outside stack of {len(stack)}")
    last = sharpest_index + (k_levels - 1) * step_frames
    if last >= len(stack):
        raise ValueError(
            f"stack too short: level {k_levels - 1} needs frame {last}, "
            f"stack has {len(stack)}"
        )
    seeds = np.random.SeedSequence(seed).generate_state(max(k_levels, 1))
    crops, levels = [], []
    for level in range(k_levels):
        frame = stack.frames[sharpest_index + level * step_frames]
        mask = foreground_mask(frame, fg_threshold)
        for crop in sample_crops(frame, mask, CROP_SIZE, crops_per_level,
                                 min_fg_fraction, int(seeds[level])):
            crops.append(crop)
            levels.append(level)
    return DefocusDataset(
        crops=np.stack(crops).astype(np.float32),
        levels=np.asarray(levels, dtype=np.intp),
        k_levels=k_levels,
        provenance="real_zstack",
        seed=seed,
    )


def build_classifier(k_levels=10, seed=0, dtype=np.float32) -> nn.Network:
    """Two conv+pool stages, then two dense layers, for 84x84x3 crops."""
    flat = 32 * (CROP_SIZE // 4) * (CROP_SIZE // 4)  # 84 -> 42 -> 21
    specs = [
        nn.conv2d(3, 16, 3),
        nn.relu(),
        nn.maxpool2(),
        nn.conv2d(16, 32, 3),
        nn.relu(),
        nn.maxpool2(),
        nn.flatten(),
        nn.dense(flat, 128),
        nn.relu(),
        nn.dense(128, k_levels),
    ]
    return nn.Network(specs, seed=seed, dtype=dtype)


def _crops_to_batch(crops, dtype=np.float32):
    arr = np.asarray(crops, dtype=dtype)
    if arr.ndim == 3:
        arr = arr[None]
    return np.ascontiguousarray(arr.transpose(0, 3, 1, 2))


def train_classifier(dataset: DefocusDataset, config: ClassifierConfig):
    """Train with Adam on the configured loss; returns (net, epoch loss log)."""
    config.validate()
    if len(dataset) == 0:
        raise ValueError("empty dataset")
    x_all = _crops_to_batch(dataset.crops)
    y_all = dataset.levels
    net = build_classifier(dataset.k_levels, seed=config.seed)
    params = net.flat_params()
    opt = nn.AdamState.for_params(params, lr=config.lr)
    rng = np.random.default_rng(config.seed)
    log = []
    n = len(dataset)
    for _ in range(config.epochs):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, config.batch_size):
            idx = order[start : start + config.batch_size]
            xb = np.ascontiguousarray(x_all[idx])
            yb = y_all[idx]
            logits, caches = net.forward_train(xb)
            if config.loss == "cross_entropy":
                value, dlogits = nn.loss_cross_entropy(logits, yb)
            else:
                value, dlogits = nn.rps_from_logits(logits, yb)
            grads, _ = net.backward(caches, dlogits, input_grad=False)
            flat_grads = [g for group in grads for g in group]
            opt.step(params, flat_grads)
            total += value * len(idx)
        log.append(total / n)
    return net, log


def dataset_loss(net, dataset: DefocusDataset, loss="cross_entropy", batch_size=64):
    """Mean loss over the whole dataset with fixed order (no shuffling)."""
    total = 0.0
    for start in range(0, len(dataset), batch_size):
        crops = dataset.crops[start : start + batch_size]
        levels = dataset.levels[start : start + batch_size]
        logits = net.forward(_crops_to_batch(crops))
        if loss == "cross_entropy":
            value, _ = nn.loss_cross_entropy(logits, levels)
        else:
            value, _ = nn.rps_from_logits(logits, levels)
        total += value * len(crops)
    return total / len(dataset)


def predict_level(net, crop):
    """Softmax level probabilities for one 84x84x3 crop."""
    crop = np.asarray(crop)
    if crop.shape != (CROP_SIZE, CROP_SIZE, 3):
        raise ValueError(f"expected ({CROP_SIZE}, {CROP_SIZE}, 3) crop, got {crop.shape}")
    return nn.softmax(net.forward(_crops_to_batch(crop)))[0]


def predict_levels(net, crops):
    """Batched softmax probabilities, (M, K)."""
    return nn.softmax(net.forward(_crops_to_batch(np.asarray(crops))))


def expected_levels(probs):
    probs = np.atleast_2d(probs)
    k = probs.shape[1]
    return probs @ np.arange(k, dtype=np.float64)


def classify_frame(net, frame, n_crops=8, seed=0, level_threshold=None,
                   fg_threshold=0.05, min_fg_fraction=0.5):
    """Frame decision from sampled crops.

    Returns (decision, mean expected level, per-crop expected levels); the
    frame is in focus iff the *minimum* per-crop expected level is at or
    below the threshold, so one sharp region suffices.
    """
    h, w = frame.shape[:2]
    if h < CROP_SIZE or w < CROP_SIZE:
        raise ValueError(f"frame {h}x{w} smaller than crop size {CROP_SIZE}")
    k_levels = net.specs[-1].units_out
    if level_threshold is None:
        level_threshold = default_level_threshold(k_levels)
    mask = foreground_mask(frame, fg_threshold)
    crops = sample_crops(frame, mask, CROP_SIZE, n_crops, min_fg_fraction, seed)
    probs = predict_levels(net, np.stack(crops))
    levels = expected_levels(probs)
    decision = "in_focus" if levels.min() <= level_threshold else "out_of_focus"
    return decision, float(levels.mean()), [float(v) for v in levels]


def wilson_interval(successes, n, z=1.959963984540054):
    """95% Wilson score interval for a binomial proportion."""
    if n <= 0:
        raise ValueError("n must be positive")
    phat = successes / n
    z2 = z * z
    denom = 1.0 + z2 / n
    center = (phat + z2 / (2 * n)) / denom
    half = z * math.sqrt(phat * (1 - phat) / n + z2 / (4 * n * n)) / denom
    return max(0.0, center - half), min(1.0, center + half)


def evaluate_accuracy(net, crops, in_focus_labels, level_threshold=None):
    """Binary accuracy (expected level vs threshold) with Wilson 95% bounds."""
    crops = np.asarray(crops)
    labels = np.asarray(in_focus_labels, dtype=bool)
    if len(crops) == 0:
        raise ValueError("empty evaluation set")
    if len(labels) != len(crops):
        raise ValueError("labels and crops lengths differ")
    k_levels = net.specs[-1].units_out
    if level_threshold is None:
        level_threshold = default_level_threshold(k_levels)
    levels = expected_levels(predict_levels(net, crops))
    predicted = levels <= level_threshold
    correct = int((predicted == labels).sum())
    acc = correct / len(labels)
    return acc, wilson_interval(correct, len(labels))


def calibrate_level_threshold(net, crops, in_focus_labels, grid=None):
    """Sweep the decision threshold on labeled crops; returns the best one.

    Meant to run on held-in data; the swept threshold then feeds
    evaluate_accuracy on unseen crops.
    """
    crops = np.asarray(crops)
    labels = np.asarray(in_focus_labels, dtype=bool)
    k_levels = net.specs[-1].units_out
    if grid is None:
        grid = np.arange(0.25, k_levels - 1 + 1e-9, 0.25)
    levels = expected_levels(predict_levels(net, crops))
    best_thr, best_acc = float(grid[0]), -1.0
    for thr in grid:
        acc = float(((levels <= thr) == labels).mean())
        if acc > best_acc:
            best_thr, best_acc = float(thr), acc
    return best_thr, best_acc


def evaluate_level_error(net, crops, true_levels):
    """Mean absolute ordinal error |argmax - truth| over labeled crops."""
    probs = predict_levels(net, np.asarray(crops))
    pred = probs.argmax(axis=1)
    return float(np.abs(pred - np.asarray(true_levels)).mean())
