import math

import numpy as np
import pytest

from deepradar.autodiff.tensor import Tensor, precision
from deepradar.errors import ConfigError, ShapeError
from deepradar.services.nets.vae import LatentGaussian
from deepradar.services.oracle import generate_dataset
from deepradar.services.training.losses import (
    PROB_CLAMP,
    latent_kl,
    loss_adv,
    loss_disc,
    loss_mixed,
    loss_vae,
    reconstruction_loss,
)
from deepradar.services.training.split import split_dataset


def latent(mean, logvar):
    return LatentGaussian(Tensor(np.atleast_2d(mean)), Tensor(np.atleast_2d(logvar)))


# =============================================================================
# L_vae
# =============================================================================

def test_perfect_reconstruction_with_standard_posterior_is_zero():
    y = np.full((2, 4, 4, 1), 0.25)
    assert loss_vae(Tensor(y), y, latent(np.zeros((2, 3)), np.zeros((2, 3)))).item() == 0.0


def test_shifted_posterior_mean():
    y = np.zeros((1, 2, 2, 1))
    assert loss_vae(Tensor(y), y, latent([1.0], [0.0])).item() == pytest.approx(0.5)


def test_inflated_posterior_variance():
    y = np.zeros((1, 2, 2, 1))
    value = loss_vae(Tensor(y), y, latent([0.0], [1.0])).item()
    assert value == pytest.approx(0.5 * (math.e - 2.0), abs=1e-4)
    assert value == pytest.approx(0.3591, abs=1e-4)


def test_reconstruction_term_scales_with_variance():
    y = np.zeros((1, 2, 2, 1))
    y_hat = Tensor(np.ones((1, 2, 2, 1)))
    assert reconstruction_loss(y_hat, y, 1.0).item() == pytest.approx(2.0)
    assert reconstruction_loss(y_hat, y, 0.5).item() == pytest.approx(4.0)
    with pytest.raises(ValueError):
        reconstruction_loss(y_hat, y, 0.0)
    with pytest.raises(ShapeError):
        reconstruction_loss(y_hat, np.zeros((1, 2, 1, 1)), 1.0)


def test_kl_is_nonnegative_and_zero_only_at_standard_normal(rng):
    with precision(np.float64):
        for _ in range(50):
            mean = rng.normal(size=(2, 4))
            logvar = rng.normal(size=(2, 4))
            assert latent_kl(latent(mean, logvar)).item() > 0.0
        assert latent_kl(latent(np.zeros((2, 4)), np.zeros((2, 4)))).item() == 0.0


def test_closed_form_kl_matches_monte_carlo(rng):
    n_samples = 1_000_000
    for _ in range(10):
        mean = rng.uniform(0.5, 1.5, size=3)
        logvar = rng.uniform(-1.0, 1.0, size=3)
        sigma = np.exp(0.5 * logvar)
        z = mean + sigma * rng.standard_normal((n_samples, 3))
        log_q = -0.5 * np.sum(((z - mean) / sigma) ** 2 + logvar + math.log(2 * math.pi), axis=1)
        log_p = -0.5 * np.sum(z ** 2 + math.log(2 * math.pi), axis=1)
        estimate = float(np.mean(log_q - log_p))
        with precision(np.float64):
            closed = latent_kl(latent(mean, logvar)).item()
        assert estimate == pytest.approx(closed, rel=0.01)


# =============================================================================
# Adversarial losses
# =============================================================================

def test_generator_loss_at_chance():
    assert loss_adv(Tensor(np.array([0.5, 0.5]))).item() == pytest.approx(math.log(2), abs=1e-4)


def test_perfect_discriminator_loss_vanishes():
    value = loss_disc(Tensor(np.array([1.0 - PROB_CLAMP])), Tensor(np.array([PROB_CLAMP])))
    assert value.item() == pytest.approx(0.0, abs=1e-5)


def test_discriminator_loss_at_chance():
    half = Tensor(np.array([0.5]))
    assert loss_disc(half, half).item() == pytest.approx(2 * math.log(2), abs=1e-4)


def test_probabilities_are_clamped():
    assert math.isfinite(loss_adv(Tensor(np.array([0.0]))).item())
    assert math.isfinite(loss_disc(Tensor(np.array([0.0])), Tensor(np.array([1.0]))).item())


# =============================================================================
# Mixed objective
# =============================================================================

def test_mixed_endpoints():
    assert loss_mixed(10.0, 0.7, 1.0) == 10.0
    assert loss_mixed(10.0, 0.7, 0.0) == 0.7


def test_mixed_default_weight():
    assert loss_mixed(10.0, 0.7, 0.99) == pytest.approx(9.907)


def test_mixed_on_tensors():
    value = loss_mixed(Tensor(np.array(10.0)), Tensor(np.array(0.7)), 0.99)
    assert value.item() == pytest.approx(9.907, abs=1e-4)


def test_mixed_rejects_weight_outside_unit_interval():
    with pytest.raises(ValueError):
        loss_mixed(1.0, 1.0, 1.5)


# =============================================================================
# Train/test split
# =============================================================================

@pytest.fixture
def hundred_frames(tiny_oracle):
    return generate_dataset(100, tiny_oracle, seed=2, workers=1)


def test_split_partitions_frames(hundred_frames):
    train, test = split_dataset(hundred_frames, 0.9, seed=3)
    assert len(train) == 90
    assert len(test) == 10
    train_idx = set(train.frame_indices.tolist())
    test_idx = set(test.frame_indices.tolist())
    assert not train_idx & test_idx
    assert train_idx | test_idx == set(range(100))


def test_split_is_deterministic(hundred_frames):
    a, _ = split_dataset(hundred_frames, 0.9, seed=3)
    b, _ = split_dataset(hundred_frames, 0.9, seed=3)
    assert a.frame_indices.tolist() == b.frame_indices.tolist()


def test_split_depends_on_seed(hundred_frames):
    splits = {tuple(split_dataset(hundred_frames, 0.9, seed=s)[1].frame_indices.tolist()) for s in range(5)}
    assert len(splits) == 5


def test_split_rejects_bad_inputs(hundred_frames):
    with pytest.raises(ConfigError):
        split_dataset(hundred_frames, 1.0)
    with pytest.raises(ConfigError):
        split_dataset(hundred_frames.subset([0]), 0.9)
