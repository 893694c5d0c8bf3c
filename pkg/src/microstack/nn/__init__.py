"""Minimal deterministic neural-network engine.

Forward, hand-derived backward, and Adam for the small convolutional models
this package trains. Layer kinds: conv2d (stride 1, reflect padding), relu,
maxpool2, dense, nearest_upsample2, flatten. Compute is float32; a float64
mode exists for gradient verification.
"""

from microstack.nn.core import LayerSpec, Network, Tensor, conv2d, dense, flatten, maxpool2, nearest_upsample2, relu
from microstack.nn.losses import (
    loss_bce,
    loss_cross_entropy,
    loss_masked_l1,
    loss_mse,
    loss_rps,
    rps_from_logits,
    softmax,
)
from microstack.nn.optim import AdamState
from microstack.nn.augment import apply_flip_rot, augment
from microstack.nn.serialize import load_model, save_model

__all__ = [
    "AdamState",
    "LayerSpec",
    "Network",
    "Tensor",
    "apply_flip_rot",
    "augment",
    "conv2d",
    "dense",
    "flatten",
    "load_model",
    "loss_bce",
    "loss_cross_entropy",
    "loss_masked_l1",
    "loss_mse",
    "loss_rps",
    "maxpool2",
    "nearest_upsample2",
    "relu",
    "rps_from_logits",
    "save_model",
    "softmax",
]
