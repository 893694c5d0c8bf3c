import numpy as np
import pytest

from microstack import deblur, nn, quality, synth
from microstack.deblur import (
    BlurRecipe,
    DeblurConfig,
    build_srcnn,
    checkerboard_diagnostic,
    deblur_image,
    make_blur_pairs,
    restore,
    train_deblur,
)


@pytest.fixture(scope="module")
def frames():
    return [synth.make_texture(160, 160, seed=70 + i) for i in range(3)]


class TestBlurPairs:
    def test_identity_recipe(self, frames):
        recipe = BlurRecipe(kinds=("disk",), disk_radius=(0.0, 0.0), noise_sigma=0.0)
        pairs = make_blur_pairs(frames, recipe, count=3, seed=0)
        for b, s in zip(pairs.blurred, pairs.sharp):
            assert np.array_equal(b, s)

    def test_psnr_decreases_with_motion_length(self, frames):
        frame = frames[0]
        psnrs = []
        for length in (3, 5, 7, 9):
            recipe = BlurRecipe(kinds=("motion",), motion_length=(length, length),
                                motion_angle=(30.0, 30.0), noise_sigma=0.0)
            pairs = make_blur_pairs([frame], recipe, count=1, seed=5)
            psnrs.append(quality.psnr(pairs.blurred[0], frame))
        assert all(a > b for a, b in zip(psnrs, psnrs[1:]))

    def test_deterministic(self, frames):
        recipe = BlurRecipe()
        a = make_blur_pairs(frames, recipe, count=6, seed=9)
        b = make_blur_pairs(frames, recipe, count=6, seed=9)
        assert all(np.array_equal(x, y) for x, y in zip(a.blurred, b.blurred))

    def test_empty_input_rejected(self):
        with pytest.raises(ValueError, match="at least one"):
            make_blur_pairs([], BlurRecipe(), 1)


class TestSrcnn:
    def test_output_shape_matches_input(self):
        net = build_srcnn(seed=0)
        for size in (64, 96):
            x = np.random.default_rng(0).random((1, 3, size, size)).astype(np.float32)
            assert net.forward(x).shape == (1, 3, size, size)

    def test_three_convs_two_relus(self):
        kinds = [s.kind for s in build_srcnn().specs]
        assert kinds == ["conv2d", "relu", "conv2d", "relu", "conv2d"]
        assert kinds.count("conv2d") == 3
        assert kinds.count("relu") == 2

    def test_kernel_sizes(self):
        specs = [s for s in build_srcnn().specs if s.kind == "conv2d"]
        assert [s.kernel_size for s in specs] == [9, 1, 5]
        assert [s.in_channels for s in specs] == [3, 64, 32]
        assert [s.out_channels for s in specs] == [64, 32, 3]

    def test_identity_init_is_identity(self, frames):
        net = build_srcnn(identity_init=True)
        img = frames[0][:64, :64]
        out = restore(net, img)
        # relu passes non-negative images through; conv taps hit exactly
        assert np.abs(out - img).max() < 1e-6


class TestTrainDeblur:
    def test_overfit_two_pairs_gains_3db(self):
        texture = [synth.make_bandlimited_texture(96, 96, seed=80 + i) for i in range(2)]
        recipe = BlurRecipe(kinds=("gaussian",), gaussian_sigma=(1.0, 1.5), noise_sigma=0.005)
        pairs = make_blur_pairs(texture, recipe, count=2, seed=1)
        cfg = DeblurConfig(patch_size=64, epochs=200, lr=1e-3, batch_size=2,
                           patches_per_pair=8, seed=0)
        net, log = train_deblur(pairs, cfg)
        gains = []
        for b, s in zip(pairs.blurred, pairs.sharp):
            gains.append(quality.psnr(restore(net, b), s) - quality.psnr(b, s))
        assert min(gains) > 3.0

    def test_deterministic_per_seed(self, frames):
        recipe = BlurRecipe()
        pairs = make_blur_pairs(frames, recipe, count=4, seed=2)
        cfg = DeblurConfig(patch_size=48, epochs=2, lr=1e-3, batch_size=2, seed=4)
        with pytest.raises(ValueError):
            DeblurConfig(patch_size=16).validate()
        net1, log1 = train_deblur(pairs, cfg)
        net2, log2 = train_deblur(pairs, cfg)
        assert log1 == log2
        for t1, t2 in zip(net1.flat_params(), net2.flat_params()):
            assert np.array_equal(t1.data, t2.data)

    def test_empty_pairs_rejected(self):
        recipe = BlurRecipe()
        empty = deblur.BlurPairSet([], [], recipe, 0)
        with pytest.raises(ValueError, match="empty"):
            train_deblur(empty, DeblurConfig(epochs=1))


class TestDeblurImage:
    def test_small_image_single_pass(self, frames):
        net = build_srcnn(identity_init=True)
        img = frames[0][:80, :80]
        tiled = deblur_image(net, img, tile=256, overlap=16)
        direct = restore(net, img)
        assert np.array_equal(tiled, direct)

    def test_constant_through_identity_net_no_seams(self):
        net = build_srcnn(identity_init=True)
        img = np.full((300, 300, 3), 0.42, dtype=np.float32)
        out = deblur_image(net, img, tile=128, overlap=16)
        assert out.shape == img.shape
        assert np.abs(out - 0.42).max() < 1e-6

    def test_tiled_matches_untiled(self, trained_srcnn):
        net, _ = trained_srcnn
        img = synth.make_texture(300, 300, seed=90)
        tiled = deblur_image(net, img, tile=128, overlap=16)
        whole = restore(net, img)
        assert np.abs(tiled.astype(np.float64) - whole).mean() < 1e-3

    def test_output_in_range(self, trained_srcnn):
        net, _ = trained_srcnn
        img = synth.make_texture(128, 128, seed=91)
        out = deblur_image(net, img)
        assert out.shape == img.shape
        assert out.min() >= 0.0 and out.max() <= 1.0


class TestCheckerboardDiagnostic:
    def test_resize_convolution_constant_stays_constant(self):
        for seed in range(10):
            var = checkerboard_diagnostic("resize_convolution", seed=seed)
            assert var.max() < 1e-12

    def test_transposed_conv_shows_pattern(self):
        hits = 0
        for seed in range(20):
            var = checkerboard_diagnostic("transposed_conv_stride2", seed=seed)
            if var.max() > 1e-6:
                hits += 1
        assert hits >= 19

    def test_transposed_period2_structure(self):
        # row parity means differ: the signature of uneven tap overlap
        rng = np.random.default_rng(3)
        w = rng.standard_normal((1, 1, 3, 3))
        x = np.full((1, 10, 10), 0.5)
        out = deblur._transposed_conv2_stride2(x, w)[0]
        inner = out[3:-3, 3:-3]
        even = inner[::2].mean()
        odd = inner[1::2].mean()
        assert abs(even - odd) > 1e-6

    def test_equal_weights_zero_variance_only_when_k_divides_stride(self):
        eq2 = np.full((3, 3, 2, 2), 0.1)
        eq3 = np.full((3, 3, 3, 3), 0.1)
        v2 = checkerboard_diagnostic("transposed_conv_stride2", weights=eq2, kernel_size=2)
        v3 = checkerboard_diagnostic("transposed_conv_stride2", weights=eq3)
        assert v2.max() < 1e-12
        assert v3.max() > 1e-6
        # closed-form overlap counts: k=2,s=2 gives every output exactly one
        # tap; k=3,s=2 alternates 2 and 1 contributions along each axis
        k, s, n = 3, 2, 10
        counts = np.zeros(s * n + k - s)
        for i in range(n):
            counts[s * i : s * i + k] += 1
        inner = counts[k - 1 : -(k - 1)]
        assert set(inner.tolist()) == {1.0, 2.0}

    def test_unknown_upsampler_rejected(self):
        with pytest.raises(ValueError, match="unknown upsampler"):
            checkerboard_diagnostic("bilinear")
