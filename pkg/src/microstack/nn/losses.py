"""Loss functions: value plus analytic gradient w.r.t. the prediction.

All batched losses mean-reduce over the batch, so gradients carry the 1/N
factor. 1-d inputs are treated as a single sample.
"""

import numpy as np

BCE_CLAMP = 1e-7


def _batched(x):
    x = np.asarray(x)
    if x.ndim == 1:
        return x[None, :], True
    return x, False


def softmax(logits):
    logits = np.asarray(logits, dtype=np.float64)
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def loss_cross_entropy(logits, classes):
    """Softmax cross-entropy; grad = softmax(logits) - onehot, mean-reduced."""
    logits, squeeze = _batched(logits)
    classes = np.atleast_1d(np.asarray(classes, dtype=np.intp))
    n, k = logits.shape
    if classes.shape != (n,):
        raise ValueError(f"expected {n} class labels, got shape {classes.shape}")
    if classes.min() < 0 or classes.max() >= k:
        raise ValueError(f"class index out of range [0, {k})")
    p = softmax(logits)
    picked = p[np.arange(n), classes]
    value = float(-np.log(np.maximum(picked, 1e-300)).mean())
    grad = p.copy()
    grad[np.arange(n), classes] -= 1.0
    grad /= n
    grad = grad.astype(np.asarray(logits).dtype, copy=False)
    return value, (grad[0] if squeeze else grad)


def loss_rps(probs, classes):
    """Ranked probability score on ordinal classes.

    RPS = sum_k (CDFpred(k) - CDFtrue(k))^2 with CDFs as cumulative sums;
    gradient flows through the cumulative sums.
    """
    probs, squeeze = _batched(probs)
    classes = np.atleast_1d(np.asarray(classes, dtype=np.intp))
    n, k = probs.shape
    if classes.shape != (n,):
        raise ValueError(f"expected {n} class labels, got shape {classes.shape}")
    if classes.min() < 0 or classes.max() >= k:
        raise ValueError(f"class index out of range [0, {k})")
    p64 = np.asarray(probs, dtype=np.float64)
    if p64.min() < -1e-9 or np.any(np.abs(p64.sum(axis=1) - 1.0) > 1e-6):
        raise ValueError("probs is not a probability distribution")
    cdf = np.cumsum(p64, axis=1)
    true_cdf = (np.arange(k)[None, :] >= classes[:, None]).astype(np.float64)
    diff = cdf - true_cdf
    value = float((diff**2).sum(axis=1).mean())
    # d/dp_j sum_k diff_k^2 = 2 * sum_{k >= j} diff_k
    grad = 2.0 * np.cumsum(diff[:, ::-1], axis=1)[:, ::-1] / n
    grad = grad.astype(np.asarray(probs).dtype, copy=False)
    return value, (grad[0] if squeeze else grad)


def rps_from_logits(logits, classes):
    """RPS evaluated on softmax(logits); gradient w.r.t. the logits."""
    logits, squeeze = _batched(logits)
    p = softmax(logits)
    value, dp = loss_rps(p, np.atleast_1d(classes))
    # softmax Jacobian: dL/dz = p * (dp - sum(dp * p))
    inner = (dp * p).sum(axis=1, keepdims=True)
    grad = (p * (dp - inner)).astype(np.asarray(logits).dtype, copy=False)
    return value, (grad[0] if squeeze else grad)


def loss_mse(pred, target):
    """Mean squared error over all elements."""
    pred = np.asarray(pred)
    target = np.asarray(target)
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch: {pred.shape} vs {target.shape}")
    diff = pred.astype(np.float64) - target.astype(np.float64)
    value = float((diff**2).mean())
    grad = (2.0 * diff / diff.size).astype(pred.dtype, copy=False)
    return value, grad


def loss_bce(pred, target):
    """Binary cross-entropy, predictions clamped to [1e-7, 1 - 1e-7]."""
    pred = np.asarray(pred)
    target = np.asarray(target)
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch: {pred.shape} vs {target.shape}")
    p = np.clip(pred.astype(np.float64), BCE_CLAMP, 1.0 - BCE_CLAMP)
    t = target.astype(np.float64)
    value = float((-(t * np.log(p) + (1.0 - t) * np.log(1.0 - p))).mean())
    grad = ((p - t) / (p * (1.0 - p)) / p.size).astype(pred.dtype, copy=False)
    return value, grad


def loss_masked_l1(pred, sources, masks):
    """Mean absolute error of `pred` against per-region sources.

    Each source contributes only inside its (disjoint) mask; the channel-
    summed absolute differences are averaged over the union pixel count.
    """
    pred = np.asarray(pred)
    if len(sources) != len(masks):
        raise ValueError(f"{len(sources)} sources but {len(masks)} masks")
    h, w = pred.shape[:2]
    occupancy = np.zeros((h, w), dtype=np.int32)
    total = 0.0
    for src, mask in zip(sources, masks):
        if src.shape != pred.shape:
            raise ValueError(f"source shape {src.shape} != pred shape {pred.shape}")
        if mask.shape != (h, w):
            raise ValueError(f"mask shape {mask.shape} != image grid {(h, w)}")
        occupancy += mask.astype(np.int32)
        diff = np.abs(pred.astype(np.float64) - src.astype(np.float64))
        if diff.ndim == 3:
            diff = diff.sum(axis=2)
        total += float(diff[mask].sum())
    if occupancy.max() > 1:
        raise ValueError("masks overlap")
    union = int((occupancy > 0).sum())
    if union == 0:
        raise ValueError("mask union is empty")
    return total / union
