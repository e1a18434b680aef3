"""
Losses, dataset splitting and the training loop.
"""
from deepradar.services.training.losses import latent_kl, loss_adv, loss_disc, loss_mixed, loss_vae
from deepradar.services.training.split import split_dataset
from deepradar.services.training.trainer import Trainer, TrainResult, train
