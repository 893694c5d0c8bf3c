import numpy as np
import pytest

from microstack import defocus, synth
from microstack.defocus import (
    ClassifierConfig,
    build_classifier,
    build_synthetic_dataset,
    build_zstack_dataset,
    classify_frame,
    evaluate_accuracy,
    predict_level,
    train_classifier,
    wilson_interval,
)
from microstack.focusmeasure import tenengrad
from microstack.imgcore import to_grayscale


@pytest.fixture(scope="module")
def specimens():
    return [synth.make_specimen(200, 200, seed=s) for s in range(2)]


@pytest.fixture(scope="module")
def overfit_run(specimens):
    """16 crops, 500 epochs: the capacity sanity check."""
    ds = build_synthetic_dataset(specimens, k_levels=4, crops_per_level=4, seed=21)
    assert len(ds) == 16
    cfg = ClassifierConfig(k_levels=4, epochs=500, lr=1e-3, batch_size=8, seed=1)
    net, log = train_classifier(ds, cfg)
    return net, log, ds


class TestArchitecture:
    def test_output_is_k_logits(self):
        net = build_classifier(k_levels=10, seed=0)
        x = np.random.default_rng(0).random((1, 3, 84, 84)).astype(np.float32)
        assert net.forward(x).shape == (1, 10)

    def test_flatten_size(self):
        net = build_classifier(k_levels=10)
        dense_spec = net.specs[7]
        assert dense_spec.kind == "dense"
        assert dense_spec.units_in == 32 * 21 * 21 == 14112

    def test_parameter_count_closed_form(self):
        k = 10
        net = build_classifier(k_levels=k)
        conv1 = 16 * 3 * 3 * 3 + 16
        conv2 = 32 * 16 * 3 * 3 + 32
        dense1 = 14112 * 128 + 128
        dense2 = 128 * k + k
        assert net.num_params() == conv1 + conv2 + dense1 + dense2

    def test_layer_pattern(self):
        kinds = [s.kind for s in build_classifier().specs]
        assert kinds == [
            "conv2d", "relu", "maxpool2",
            "conv2d", "relu", "maxpool2",
            "flatten", "dense", "relu", "dense",
        ]


class TestSyntheticDataset:
    def test_level0_crops_equal_raw_crops(self, specimens):
        ds = build_synthetic_dataset(specimens, k_levels=2, crops_per_level=6, seed=3)
        from microstack.imgcore import foreground_mask, sample_crops

        seeds = np.random.SeedSequence(3).generate_state(len(specimens) * 2 * 2)
        raw = []
        counts = [3, 3]
        for i, img in enumerate(specimens):
            mask = foreground_mask(img, 0.05)
            raw.extend(sample_crops(img, mask, 84, counts[i], 0.5, int(seeds[(i * 2 + 0) * 2])))
        level0 = ds.crops[ds.levels == 0]
        assert np.array_equal(level0, np.stack(raw))

    def test_balanced_counts(self, specimens):
        ds = build_synthetic_dataset(specimens, k_levels=3, crops_per_level=7, seed=4)
        counts = np.bincount(ds.levels, minlength=3)
        assert counts.tolist() == [7, 7, 7]

    def test_sharpness_decreases_with_level(self, specimens):
        ds = build_synthetic_dataset(specimens, k_levels=4, crops_per_level=10, seed=5)
        scores = {
            k: [tenengrad(to_grayscale(c)).value for c in ds.crops[ds.levels == k]]
            for k in range(4)
        }
        wins = sum(
            1
            for k in range(3)
            for a, b in zip(scores[k], scores[k + 1])
            if a > b
        )
        assert wins >= 0.9 * 3 * 10

    def test_deterministic(self, specimens):
        a = build_synthetic_dataset(specimens, k_levels=3, crops_per_level=5, seed=6)
        b = build_synthetic_dataset(specimens, k_levels=3, crops_per_level=5, seed=6)
        assert np.array_equal(a.crops, b.crops)
        assert np.array_equal(a.levels, b.levels)

    def test_blur_families(self, specimens):
        for family in ("gaussian", "disk", "airy"):
            ds = build_synthetic_dataset(
                specimens[:1], k_levels=2, crops_per_level=2, blur_family=family, seed=7
            )
            assert len(ds) == 4


class TestZStackDataset:
    def test_single_level(self):
        stack = synth.make_zstack(200, 200, n_frames=3, seed=8)
        ds = build_zstack_dataset(stack, sharpest_index=0, k_levels=1, step_frames=1,
                                  crops_per_level=5, seed=9)
        assert len(ds) == 5
        assert set(ds.levels.tolist()) == {0}

    def test_stack_too_short(self):
        stack = synth.make_zstack(200, 200, n_frames=3, seed=8)
        with pytest.raises(ValueError, match="too short"):
            build_zstack_dataset(stack, 0, k_levels=4, step_frames=1, crops_per_level=2)

    def test_level_sharpness_non_increasing(self):
        stack = synth.make_zstack(220, 220, n_frames=5, seed=10, step=1.0)
        ds = build_zstack_dataset(stack, 0, k_levels=5, step_frames=1,
                                  crops_per_level=8, seed=11)
        means = [
            np.mean([tenengrad(to_grayscale(c)).value for c in ds.crops[ds.levels == k]])
            for k in range(5)
        ]
        assert all(a >= b for a, b in zip(means, means[1:]))


class TestTraining:
    def test_loss_decreases(self, specimens):
        ds = build_synthetic_dataset(specimens, k_levels=3, crops_per_level=20, seed=12)
        cfg = ClassifierConfig(k_levels=3, epochs=15, lr=1e-3, batch_size=8, seed=2)
        _, log = train_classifier(ds, cfg)
        assert len(log) == 15
        assert log[-1] <= log[0]

    def test_overfit_reaches_perfect_training_accuracy(self, overfit_run):
        net, log, ds = overfit_run
        probs = defocus.predict_levels(net, ds.crops)
        assert (probs.argmax(axis=1) == ds.levels).all()

    def test_same_seed_same_log(self, specimens):
        ds = build_synthetic_dataset(specimens, k_levels=3, crops_per_level=8, seed=13)
        cfg = ClassifierConfig(k_levels=3, epochs=4, lr=1e-3, batch_size=4, seed=3)
        _, log1 = train_classifier(ds, cfg)
        _, log2 = train_classifier(ds, cfg)
        assert log1 == log2

    def test_invalid_config(self):
        with pytest.raises(ValueError):
            ClassifierConfig(epochs=0).validate()
        with pytest.raises(ValueError):
            ClassifierConfig(lr=-1.0).validate()
        with pytest.raises(ValueError):
            ClassifierConfig(loss="hinge").validate()


class TestPrediction:
    def test_probabilities_sum_to_one(self, overfit_run):
        net, _, ds = overfit_run
        p = predict_level(net, ds.crops[0])
        assert p.shape == (4,)
        assert abs(p.sum() - 1.0) < 1e-6

    def test_same_crop_same_vector(self, overfit_run):
        net, _, ds = overfit_run
        a = predict_level(net, ds.crops[3])
        b = predict_level(net, ds.crops[3])
        assert np.array_equal(a, b)

    def test_wrong_crop_size_rejected(self, overfit_run):
        net, _, _ = overfit_run
        with pytest.raises(ValueError, match="crop"):
            predict_level(net, np.zeros((64, 64, 3), dtype=np.float32))


class TestClassifyFrame:
    def test_sharp_frame_in_focus(self, overfit_run, specimens):
        net, _, _ = overfit_run
        decision, mean_level, crop_levels = classify_frame(net, specimens[0], n_crops=6, seed=0)
        assert decision == "in_focus"
        assert len(crop_levels) == 6

    def test_blurred_frame_out_of_focus(self, overfit_run, specimens):
        net, _, _ = overfit_run
        from microstack.synth import blur_frame

        blurry = blur_frame(specimens[0], "gaussian", 3 * 0.8)
        decision, mean_level, _ = classify_frame(net, blurry, n_crops=6, seed=0)
        assert decision == "out_of_focus"

    def test_single_crop_reduces_to_predict_level(self, overfit_run, specimens):
        net, _, _ = overfit_run
        decision, mean_level, crop_levels = classify_frame(net, specimens[1], n_crops=1, seed=5)
        assert len(crop_levels) == 1
        assert mean_level == pytest.approx(crop_levels[0])

    def test_frame_too_small(self, overfit_run):
        net, _, _ = overfit_run
        with pytest.raises(ValueError, match="smaller"):
            classify_frame(net, np.zeros((60, 60, 3), dtype=np.float32))


class TestEvaluation:
    def test_wilson_95_of_100(self):
        lo, hi = wilson_interval(95, 100)
        # closed-form check, cross-validated against statsmodels below
        assert lo == pytest.approx(0.8883, abs=5e-4)
        assert hi == pytest.approx(0.9785, abs=5e-4)

    def test_wilson_matches_statsmodels(self):
        proportion = pytest.importorskip("statsmodels.stats.proportion")
        for k, n in ((95, 100), (1, 30), (29, 30), (50, 100)):
            lo, hi = wilson_interval(k, n)
            slo, shi = proportion.proportion_confint(k, n, alpha=0.05, method="wilson")
            assert lo == pytest.approx(slo, abs=1e-9)
            assert hi == pytest.approx(shi, abs=1e-9)

    def test_perfect_predictor(self, overfit_run):
        net, _, ds = overfit_run
        thr = 1.5  # binary split between levels 1 and 2
        labels = ds.levels <= thr
        acc, (lo, hi) = evaluate_accuracy(net, ds.crops, labels, level_threshold=thr)
        assert acc == 1.0
        assert hi == pytest.approx(1.0)

    def test_coin_flip_predictor_near_half(self):
        # simulated decisions: a predictor with no signal lands near 0.5
        rng = np.random.default_rng(0)
        accs = []
        for _ in range(10):
            labels = rng.random(200) < 0.5
            preds = rng.random(200) < 0.5
            accs.append(float((labels == preds).mean()))
        pooled = float(np.mean(accs))
        lo, hi = wilson_interval(int(pooled * 2000), 2000)
        assert lo <= 0.5 <= hi

    def test_empty_set_rejected(self, overfit_run):
        net, _, _ = overfit_run
        with pytest.raises(ValueError, match="empty"):
            evaluate_accuracy(net, np.zeros((0, 84, 84, 3)), [])
