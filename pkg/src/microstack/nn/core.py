"""Network container, layer forward passes and hand-derived backward passes.

Activations are numpy arrays: (N, C, H, W) through spatial layers, (N, D)
after flatten. A Network owns immutable-by-convention parameter Tensors;
forward() keeps no state, so a shared Network is safe to use from several
threads. forward_train() returns the caches backward() needs.
"""

from dataclasses import dataclass, asdict

import numpy as np

from microstack import kernels


@dataclass
class Tensor:
    """A parameter array with an optional gradient buffer."""

    data: np.ndarray
    grad: np.ndarray | None = None

    @property
    def shape(self):
        return self.data.shape


@dataclass(frozen=True)
class LayerSpec:
    kind: str
    in_channels: int = 0
    out_channels: int = 0
    kernel_size: int = 0
    units_in: int = 0
    units_out: int = 0

    def to_dict(self):
        return asdict(self)


def conv2d(in_channels, out_channels, kernel_size):
    if kernel_size % 2 != 1:
        raise ValueError(f"conv2d kernel size must be odd, got {kernel_size}")
    return LayerSpec(
        "conv2d",
        in_channels=in_channels,
        out_channels=out_channels,
        kernel_size=kernel_size,
    )


def relu():
    return LayerSpec("relu")


def maxpool2():
    return LayerSpec("maxpool2")


def dense(units_in, units_out):
    return LayerSpec("dense", units_in=units_in, units_out=units_out)


def nearest_upsample2():
    return LayerSpec("nearest_upsample2")


def flatten():
    return LayerSpec("flatten")


LAYER_KINDS = ("conv2d", "relu", "maxpool2", "dense", "nearest_upsample2", "flatten")


def _reflect_pad(x, p):
    return np.pad(x, ((0, 0), (0, 0), (p, p), (p, p)), mode="reflect")


def _fold_reflect_grad(dxpad, p):
    """Collapse the gradient of a reflect pad back onto the unpadded grid."""
    if p == 0:
        return dxpad
    H = dxpad.shape[2] - 2 * p
    W = dxpad.shape[3] - 2 * p
    rows = dxpad[:, :, p : p + H, :].copy()
    for t in range(p):
        rows[:, :, p - t, :] += dxpad[:, :, t, :]
        rows[:, :, H - 2 - t, :] += dxpad[:, :, p + H + t, :]
    dx = rows[:, :, :, p : p + W].copy()
    for t in range(p):
        dx[:, :, :, p - t] += rows[:, :, :, t]
        dx[:, :, :, W - 2 - t] += rows[:, :, :, p + W + t]
    return dx


class ShapeError(ValueError):
    pass


def _expect(cond, layer_index, spec, msg):
    if not cond:
        raise ShapeError(f"layer {layer_index} ({spec.kind}): {msg}")


class Network:
    """Ordered layers plus their parameters; weights seeded He-uniform."""

    def __init__(self, specs, seed=0, dtype=np.float32, init=True):
        self.specs = list(specs)
        self.seed = int(seed)
        self.dtype = np.dtype(dtype)
        self.params: list[list[Tensor]] = []
        rng = np.random.default_rng(self.seed)
        for spec in self.specs:
            if spec.kind not in LAYER_KINDS:
                raise ValueError(f"unknown layer kind {spec.kind!r}")
            self.params.append(self._init_layer(spec, rng) if init else self._zero_layer(spec))

    def _init_layer(self, spec, rng):
        if spec.kind == "conv2d":
            fan_in = spec.in_channels * spec.kernel_size**2
            limit = np.sqrt(6.0 / fan_in)
            w = rng.uniform(
                -limit,
                limit,
                size=(spec.out_channels, spec.in_channels, spec.kernel_size, spec.kernel_size),
            ).astype(self.dtype)
            b = np.zeros(spec.out_channels, dtype=self.dtype)
            return [Tensor(w), Tensor(b)]
        if spec.kind == "dense":
            limit = np.sqrt(6.0 / spec.units_in)
            w = rng.uniform(-limit, limit, size=(spec.units_in, spec.units_out)).astype(self.dtype)
            b = np.zeros(spec.units_out, dtype=self.dtype)
            return [Tensor(w), Tensor(b)]
        return []

    def _zero_layer(self, spec):
        if spec.kind == "conv2d":
            w = np.zeros(
                (spec.out_channels, spec.in_channels, spec.kernel_size, spec.kernel_size),
                dtype=self.dtype,
            )
            return [Tensor(w), Tensor(np.zeros(spec.out_channels, dtype=self.dtype))]
        if spec.kind == "dense":
            return [
                Tensor(np.zeros((spec.units_in, spec.units_out), dtype=self.dtype)),
                Tensor(np.zeros(spec.units_out, dtype=self.dtype)),
            ]
        return []

    def astype(self, dtype):
        """Copy of the network with parameters cast (for 64-bit checks)."""
        other = Network(self.specs, seed=self.seed, dtype=dtype, init=False)
        for dst, src in zip(other.params, self.params):
            for d, s in zip(dst, src):
                d.data[...] = s.data.astype(dtype)
        return other

    def num_params(self):
        return sum(t.data.size for group in self.params for t in group)

    def flat_params(self):
        return [t for group in self.params for t in group]

    # -- execution ---------------------------------------------------------

    def _layer_forward(self, i, spec, params, x, keep):
        if spec.kind == "conv2d":
            _expect(x.ndim == 4, i, spec, f"expected 4-d input, got {x.ndim}-d")
            _expect(
                x.shape[1] == spec.in_channels,
                i,
                spec,
                f"expected {spec.in_channels} channels, got {x.shape[1]}",
            )
            p = spec.kernel_size // 2
            _expect(
                min(x.shape[2], x.shape[3]) > p,
                i,
                spec,
                f"spatial dims {x.shape[2]}x{x.shape[3]} too small for k={spec.kernel_size}",
            )
            xpad = _reflect_pad(x, p)
            y = kernels.conv_fwd(xpad, params[0].data, params[1].data)
            return y, (xpad if keep else None)
        if spec.kind == "relu":
            y = np.maximum(x, 0)
            return y, ((x > 0) if keep else None)
        if spec.kind == "maxpool2":
            _expect(x.ndim == 4, i, spec, f"expected 4-d input, got {x.ndim}-d")
            _expect(
                x.shape[2] % 2 == 0 and x.shape[3] % 2 == 0,
                i,
                spec,
                f"spatial dims {x.shape[2]}x{x.shape[3]} must be even",
            )
            y, arg = kernels.maxpool2_fwd(x)
            return y, ((arg, x.shape[2], x.shape[3]) if keep else None)
        if spec.kind == "dense":
            _expect(x.ndim == 2, i, spec, f"expected 2-d input, got {x.ndim}-d")
            _expect(
                x.shape[1] == spec.units_in,
                i,
                spec,
                f"expected {spec.units_in} features, got {x.shape[1]}",
            )
            y = x @ params[0].data + params[1].data
            return y, (x if keep else None)
        if spec.kind == "nearest_upsample2":
            _expect(x.ndim == 4, i, spec, f"expected 4-d input, got {x.ndim}-d")
            y = np.repeat(np.repeat(x, 2, axis=2), 2, axis=3)
            return y, None
        if spec.kind == "flatten":
            _expect(x.ndim >= 2, i, spec, "expected batched input")
            return np.ascontiguousarray(x).reshape(x.shape[0], -1), (x.shape if keep else None)
        raise AssertionError(spec.kind)

    def forward(self, x):
        """Stateless forward pass; safe for concurrent callers."""
        x = np.asarray(x, dtype=self.dtype)
        for i, (spec, params) in enumerate(zip(self.specs, self.params)):
            x, _ = self._layer_forward(i, spec, params, x, keep=False)
        return x

    def forward_train(self, x):
        """Forward pass that retains per-layer caches for backward()."""
        x = np.asarray(x, dtype=self.dtype)
        caches = []
        for i, (spec, params) in enumerate(zip(self.specs, self.params)):
            x, cache = self._layer_forward(i, spec, params, x, keep=True)
            caches.append(cache)
        return x, caches

    def backward(self, caches, dy, input_grad=True):
        """Gradients for every parameter (and optionally the input).

        Returns (grads, dx) where grads is a list of per-layer lists parallel
        to self.params.
        """
        if caches is None or len(caches) != len(self.specs):
            raise ValueError("backward() called without a matching forward_train() cache")
        grads = [None] * len(self.specs)
        for i in reversed(range(len(self.specs))):
            spec, params, cache = self.specs[i], self.params[i], caches[i]
            need_dx = input_grad or i > 0
            if spec.kind == "conv2d":
                xpad = cache
                dy = np.ascontiguousarray(dy)
                dw = kernels.conv_bwd_dw(xpad, dy, spec.kernel_size)
                db = dy.sum(axis=(0, 2, 3))
                grads[i] = [dw, db]
                if need_dx:
                    dxpad = kernels.conv_bwd_dx(dy, params[0].data)
                    dy = _fold_reflect_grad(dxpad, spec.kernel_size // 2)
                else:
                    dy = None
            elif spec.kind == "relu":
                grads[i] = []
                if need_dx:
                    dy = dy * cache
            elif spec.kind == "maxpool2":
                grads[i] = []
                if need_dx:
                    arg, in_h, in_w = cache
                    dy = kernels.maxpool2_bwd(np.ascontiguousarray(dy), arg, in_h, in_w)
            elif spec.kind == "dense":
                x = cache
                dw = x.T @ dy
                db = dy.sum(axis=0)
                grads[i] = [dw, db]
                if need_dx:
                    dy = dy @ params[0].data.T
            elif spec.kind == "nearest_upsample2":
                grads[i] = []
                if need_dx:
                    N, C, H2, W2 = dy.shape
                    dy = dy.reshape(N, C, H2 // 2, 2, W2 // 2, 2).sum(axis=(3, 5))
            elif spec.kind == "flatten":
                grads[i] = []
                if need_dx:
                    dy = dy.reshape(cache)
        return grads, dy
