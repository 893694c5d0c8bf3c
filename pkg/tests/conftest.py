"""Shared fixtures. The expensive trained models are session-scoped and
lazy, so unit-test runs never pay for them."""

import numpy as np
import pytest

from microstack import defocus, deblur, synth, quality

# acceptance-scale classifier settings (also reused by the ordinal check)
DESK_LEVELS = 5
DESK_CROPS_PER_LEVEL = 200
DESK_EPOCHS = 100
DESK_LR = 1e-3
DESK_BATCH = 16
N_TRAIN_SPECIMENS = 10
N_HELD_SPECIMENS = 5


def desk_config(loss="cross_entropy", seed=0):
    return defocus.ClassifierConfig(
        k_levels=DESK_LEVELS,
        epochs=DESK_EPOCHS,
        lr=DESK_LR,
        batch_size=DESK_BATCH,
        loss=loss,
        seed=seed,
    )


@pytest.fixture(scope="session")
def desk_dataset():
    specimens = [synth.make_specimen(256, 256, seed=s) for s in range(N_TRAIN_SPECIMENS)]
    return defocus.build_synthetic_dataset(
        specimens, k_levels=DESK_LEVELS, crops_per_level=DESK_CROPS_PER_LEVEL, seed=11
    )


@pytest.fixture(scope="session")
def held_dataset():
    specimens = [synth.make_specimen(256, 256, seed=100 + s) for s in range(N_HELD_SPECIMENS)]
    return defocus.build_synthetic_dataset(
        specimens, k_levels=DESK_LEVELS, crops_per_level=40, seed=99
    )


@pytest.fixture(scope="session")
def desk_classifier(desk_dataset):
    """The acceptance-scale cross-entropy run (seed 0)."""
    net, log = defocus.train_classifier(desk_dataset, desk_config())
    return net, log


@pytest.fixture(scope="session")
def deblur_train_pairs():
    frames = [synth.make_bandlimited_texture(192, 192, seed=50 + i) for i in range(5)]
    return deblur.make_blur_pairs(frames, deblur.BlurRecipe(), count=20, seed=3)


@pytest.fixture(scope="session")
def deblur_held_pairs():
    frames = [synth.make_bandlimited_texture(192, 192, seed=200 + i) for i in range(10)]
    return deblur.make_blur_pairs(frames, deblur.BlurRecipe(), count=10, seed=4)


@pytest.fixture(scope="session")
def trained_srcnn(deblur_train_pairs):
    """Desk-scale restorer: 20 pairs, 64 px patches, 100 epochs."""
    config = deblur.DeblurConfig(patch_size=64, epochs=100, lr=1e-3, batch_size=4, seed=0)
    net, log = deblur.train_deblur(deblur_train_pairs, config)
    return net, log


@pytest.fixture(scope="session")
def pristine_model():
    corpus = synth.make_clean_corpus(24, height=160, width=160, seed=500)
    return quality.fit_pristine(corpus)


@pytest.fixture(scope="session")
def clean_test_images():
    return synth.make_clean_corpus(20, height=160, width=160, seed=900)
