"""
Training losses.

L_vae is the negative ELBO with Y-independent constants dropped; the
adversarial terms are binary cross entropies on discriminator outputs.
"""
import logging
from typing import Union

from deepradar.autodiff import ops
from deepradar.autodiff.tensor import Tensor
from deepradar.errors import ShapeError
from deepradar.services.nets.vae import LatentGaussian

logger = logging.getLogger(__name__)

PROB_CLAMP = 1e-7


def reconstruction_loss(y_hat: Tensor, y, obs_variance: float) -> Tensor:
    """sum (Y - Y_hat)^2 / (2 sigma^2)."""
    y = y if isinstance(y, Tensor) else Tensor(y)
    if y.shape != y_hat.shape:
        raise ShapeError(f"prediction {y_hat.shape} and observation {y.shape} differ")
    if obs_variance <= 0:
        raise ValueError(f"observation variance must be positive, got {obs_variance}")
    return ops.scale(ops.sum(ops.square(ops.sub(y, y_hat))), 0.5 / obs_variance)


def latent_kl(latent: LatentGaussian) -> Tensor:
    """Closed-form KL[N(mu, sigma^2) || N(0, I)] = 1/2 sum(mu^2 + sigma^2 - 1 - log sigma^2)."""
    terms = ops.sub(ops.add(ops.square(latent.mean), ops.exp(latent.logvar)), latent.logvar)
    return ops.scale(ops.shift(ops.sum(terms), -float(latent.mean.size)), 0.5)


def loss_vae(y_hat: Tensor, y, latent: LatentGaussian, obs_variance: float = 1.0) -> Tensor:
    return ops.add(reconstruction_loss(y_hat, y, obs_variance), latent_kl(latent))


def _clamped(p: Tensor) -> Tensor:
    return ops.clip(p, PROB_CLAMP, 1.0 - PROB_CLAMP)


def loss_adv(d_fake: Tensor) -> Tensor:
    """-log D(fake), averaged over the batch: the generator wants fakes labeled real."""
    return ops.scale(ops.mean(ops.log(_clamped(d_fake))), -1.0)


def loss_disc(d_real: Tensor, d_fake: Tensor) -> Tensor:
    """-log D(real) - log(1 - D(fake)), each averaged over its batch."""
    real_term = ops.mean(ops.log(_clamped(d_real)))
    fake_term = ops.mean(ops.log(1.0 - _clamped(d_fake)))
    return ops.scale(ops.add(real_term, fake_term), -1.0)


def loss_mixed(l_vae: Union[Tensor, float], l_adv: Union[Tensor, float], alpha: float) -> Union[Tensor, float]:
    """alpha * L_vae + (1 - alpha) * L_adv."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    if isinstance(l_vae, Tensor) and isinstance(l_adv, Tensor):
        return ops.add(ops.scale(l_vae, alpha), ops.scale(l_adv, 1.0 - alpha))
    return alpha * float(l_vae) + (1.0 - alpha) * float(l_adv)
