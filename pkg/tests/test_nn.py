import numpy as np
import pytest

from microstack import nn
from microstack.nn.core import Network, ShapeError


def tiny_conv_net(seed=0, dtype=np.float64):
    return Network(
        [nn.conv2d(2, 3, 3), nn.relu(), nn.maxpool2(), nn.flatten(), nn.dense(3 * 3 * 3, 4)],
        seed=seed,
        dtype=dtype,
    )


class TestForward:
    def test_relu(self):
        net = Network([nn.relu()])
        out = net.forward(np.array([[-1.0, 0.0, 2.0]], dtype=np.float32))
        assert np.array_equal(out, [[0.0, 0.0, 2.0]])

    def test_maxpool_single_block(self):
        net = Network([nn.maxpool2()])
        x = np.array([[1.0, 2.0], [3.0, 4.0]], dtype=np.float32).reshape(1, 1, 2, 2)
        assert net.forward(x).ravel().tolist() == [4.0]

    def test_maxpool_tie_first_occurrence(self):
        net = Network([nn.maxpool2()])
        x = np.full((1, 1, 2, 2), 0.5, dtype=np.float32)
        _, caches = net.forward_train(x)
        arg = caches[0][0]
        assert arg.ravel().tolist() == [0]

    def test_conv_identity_1x1(self):
        net = Network([nn.conv2d(1, 1, 1)], init=False)
        net.params[0][0].data[...] = 1.0
        x = np.random.default_rng(0).random((2, 1, 5, 5)).astype(np.float32)
        assert np.allclose(net.forward(x), x, atol=1e-7)

    def test_nearest_upsample(self):
        net = Network([nn.nearest_upsample2()])
        x = np.arange(4, dtype=np.float32).reshape(1, 1, 2, 2)
        out = net.forward(x)
        assert out.shape == (1, 1, 4, 4)
        assert np.array_equal(out[0, 0, :2, :2], np.full((2, 2), 0.0))

    def test_shape_error_names_layer(self):
        net = tiny_conv_net()
        with pytest.raises(ShapeError, match=r"layer 0 \(conv2d\)"):
            net.forward(np.zeros((1, 5, 8, 8)))
        with pytest.raises(ShapeError, match=r"layer 4 \(dense\)"):
            bad = Network(net.specs[:-1] + [nn.dense(99, 4)], init=False)
            bad.forward(np.zeros((1, 2, 8, 8)))

    def test_forward_is_stateless_and_deterministic(self):
        net = tiny_conv_net(seed=3, dtype=np.float32)
        x = np.random.default_rng(1).random((2, 2, 6, 6)).astype(np.float32)
        a = net.forward(x)
        b = net.forward(x)
        assert np.array_equal(a, b)

    def test_backward_requires_cache(self):
        net = tiny_conv_net()
        with pytest.raises(ValueError, match="forward_train"):
            net.backward(None, np.zeros((1, 4)))


def numeric_grad(f, arr, h=1e-3):
    g = np.zeros_like(arr, dtype=np.float64)
    flat = arr.ravel()
    gf = g.ravel()
    for i in range(flat.size):
        old = flat[i]
        flat[i] = old + h
        fp = f()
        flat[i] = old - h
        fm = f()
        flat[i] = old
        gf[i] = (fp - fm) / (2 * h)
    return g


def check_network_grads(net, x, seeds_label="", rel_tol=1e-4):
    """Central finite differences against the analytic backward pass."""
    rng = np.random.default_rng(1234)
    target = rng.random(net.forward(x).shape)

    def loss_value():
        y = net.forward(x)
        return float(((y - target) ** 2).mean())

    y, caches = net.forward_train(x)
    _, dy = nn.loss_mse(y, target)
    grads, dx = net.backward(caches, dy, input_grad=True)

    for li, group in enumerate(grads):
        for ti, g in enumerate(group or []):
            num = numeric_grad(loss_value, net.params[li][ti].data)
            denom = np.maximum(np.abs(num), 1e-4)
            rel = np.abs(g - num) / denom
            assert rel.max() < rel_tol, (
                f"{seeds_label} layer {li} tensor {ti}: rel err {rel.max():.2e}"
            )
    num_dx = numeric_grad(loss_value, x)
    denom = np.maximum(np.abs(num_dx), 1e-4)
    assert (np.abs(dx - num_dx) / denom).max() < rel_tol


class TestGradients:
    def test_conv_pool_dense_stack(self):
        for seed in (0, 1):
            net = tiny_conv_net(seed=seed, dtype=np.float64)
            x = np.random.default_rng(seed + 10).random((2, 2, 6, 6))
            check_network_grads(net, x, f"seed {seed}")

    def test_upsample_conv_stack(self):
        net = Network(
            [nn.conv2d(1, 2, 3), nn.relu(), nn.nearest_upsample2(), nn.conv2d(2, 1, 3)],
            seed=5,
            dtype=np.float64,
        )
        x = np.random.default_rng(2).random((1, 1, 5, 5))
        check_network_grads(net, x, "upsample")

    def test_dense_outer_product_by_hand(self):
        # y = W x: dL/dW == g x^T, expanded by hand on a 2x2 case
        net = Network([nn.dense(2, 2)], seed=0, dtype=np.float64, init=False)
        net.params[0][0].data[...] = [[1.0, 2.0], [3.0, 4.0]]
        x = np.array([[0.5, -1.5]])
        y, caches = net.forward_train(x)
        g = np.array([[0.25, -0.75]])
        grads, _ = net.backward(caches, g)
        dw = grads[0][0]
        hand = np.array(
            [
                [0.5 * 0.25, 0.5 * -0.75],
                [-1.5 * 0.25, -1.5 * -0.75],
            ]
        )
        assert np.allclose(dw, hand, atol=1e-12)
        assert np.allclose(grads[0][1], g[0], atol=1e-12)

    def test_zero_upstream_gives_zero_grads(self):
        net = tiny_conv_net(seed=2, dtype=np.float64)
        x = np.random.default_rng(3).random((1, 2, 6, 6))
        y, caches = net.forward_train(x)
        grads, dx = net.backward(caches, np.zeros_like(y))
        assert all(np.all(g == 0) for group in grads for g in (group or []))
        assert np.all(dx == 0)

    def test_maxpool_routes_to_argmax(self):
        net = Network([nn.maxpool2()])
        x = np.array([[1.0, 4.0], [2.0, 3.0]], dtype=np.float64).reshape(1, 1, 2, 2)
        y, caches = net.forward_train(x)
        _, dx = net.backward(caches, np.ones_like(y))
        assert dx.ravel().tolist() == [0.0, 1.0, 0.0, 0.0]


class TestResizeConvolutionProperty:
    def test_constant_maps_to_constant_for_any_weights(self):
        # the checkerboard-free property of nearest-upsample + conv
        for seed in range(5):
            net = Network(
                [nn.nearest_upsample2(), nn.conv2d(3, 3, 3)], seed=seed, dtype=np.float64
            )
            x = np.full((1, 3, 7, 7), 0.31, dtype=np.float64)
            out = net.forward(x)
            assert out.reshape(3, -1).var(axis=1).max() < 1e-12
