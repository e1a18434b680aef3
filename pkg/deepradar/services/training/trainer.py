"""
Training loop for all five model variants.

Direct variants minimize their NLL. The vae variant minimizes L_vae with z
drawn through the recognition network. Adversarial variants alternate
discriminator steps (real batch labeled 1, generated batch labeled 0) with a
generator step on alpha * L_vae + (1 - alpha) * L_adv, where the generated
batch decodes prior draws z ~ N(0, I) as in deployment.

Every random draw comes from a stream keyed by (seed, purpose, epoch,
batch), so a seed fixes the whole trajectory.
"""
import logging
import math
import time
from pathlib import Path
from typing import Callable, Dict, List, NamedTuple, Optional, Tuple, Union

import numpy as np

from deepradar.autodiff.optim import Adadelta
from deepradar.autodiff.tensor import Tape, Tensor, backward
from deepradar.errors import ConfigError, NonFiniteError, TrainingDivergedError
from deepradar.models.training import TrainConfig, TrainLog, TrainLogRecord
from deepradar.scene.dataset import Dataset, DatasetBatch
from deepradar.scene.grid import normalize_power
from deepradar.services.nets.radar_model import (
    ModelCheckpoint,
    RadarModel,
    TrainingMetadata,
    VaeModel,
    build_model,
    checkpoint_header,
    save_model,
)
from deepradar.services.training.losses import loss_adv, loss_disc, loss_mixed, loss_vae
from deepradar.utils.monitoring.metrics import OPTIMIZER_STEPS, record_epoch
from deepradar.utils.random_streams import PRIOR, RECOGNITION_NOISE, SHUFFLE, stream

logger = logging.getLogger(__name__)


class TrainResult(NamedTuple):
    model: RadarModel
    checkpoint: ModelCheckpoint
    log: TrainLog


def _check_grads(params: Dict[str, Tensor], epoch: int, batch: int) -> None:
    for name, tensor in params.items():
        if tensor.grad is not None and not np.all(np.isfinite(tensor.grad)):
            raise TrainingDivergedError(f"{name}.grad", epoch, batch)


def _evaluate(objective: Callable[[], float]) -> float:
    """Objective value, or +inf when the candidate parameters produce non-finite values."""
    try:
        value = objective()
    except NonFiniteError:
        return math.inf
    return value if math.isfinite(value) else math.inf


def epoch_checkpoint_path(path: Union[str, Path], epoch: int) -> Path:
    path = Path(path)
    return path.with_name(f"{path.stem}.epoch{epoch:04d}{path.suffix}")


class Trainer:
    """Owns one model, its optimizers and the run's random streams."""

    def __init__(self, config: TrainConfig, model: RadarModel):
        if model.variant is not config.variant:
            raise ConfigError(f"model variant {model.variant.value} does not match config {config.variant.value}")
        self.config = config
        self.model = model
        self.alpha = config.effective_alpha
        self.generator_params = model.generator_parameters()
        self.discriminator_params = model.discriminator_parameters()
        self.generator_opt = Adadelta(self.generator_params, rho=config.rho, epsilon=config.epsilon)
        self.discriminator_opt = (
            Adadelta(self.discriminator_params, rho=config.rho, epsilon=config.epsilon)
            if self.discriminator_params else None
        )
        self.rejected_steps = 0

    def _minimize(self, tape: Tape, loss: Tensor, params: Dict[str, Tensor], optimizer: Adadelta,
                  network: str, epoch: int, batch: int, objective: Optional[Callable[[], float]] = None) -> None:
        self.model.zero_grad()
        backward(loss, tape)
        _check_grads(params, epoch, batch)
        if objective is not None and self.config.backtrack_steps:
            self._guarded_step(loss.item(), params, optimizer, objective, epoch, batch)
        else:
            optimizer.step()
        OPTIMIZER_STEPS.labels(network=network).inc()

    def _guarded_step(self, current: float, params: Dict[str, Tensor], optimizer: Adadelta,
                      objective: Callable[[], float], epoch: int, batch: int) -> None:
        """
        Apply the ADADELTA update, halving it until ``objective`` drops below
        ``current``. When no fraction of the update helps, the parameters are
        restored exactly. Optimizer accumulators keep the full proposed update.
        """
        start = {name: p.data.copy() for name, p in params.items()}
        updates = optimizer.step()
        for attempt in range(self.config.backtrack_steps + 1):
            if attempt:
                fraction = 0.5 ** attempt
                for name, p in params.items():
                    p.data[...] = start[name] + (fraction * updates[name]).astype(p.data.dtype)
            if _evaluate(objective) < current:
                return
        for name, p in params.items():
            p.data[...] = start[name]
        self.rejected_steps += 1
        logger.debug(f"Rejected update at epoch {epoch}, batch {batch} after {self.config.backtrack_steps} halvings")

    def _direct_loss(self, batch: DatasetBatch, y: np.ndarray) -> Tensor:
        return self.model.nll(batch.rasters, batch.objects, y) * (1.0 / len(y))

    def _direct_step(self, batch: DatasetBatch, y: np.ndarray, epoch: int, b: int) -> Dict[str, float]:
        with Tape() as tape:
            loss = self._direct_loss(batch, y)
        self._minimize(tape, loss, self.generator_params, self.generator_opt, "generator", epoch, b,
                       objective=lambda: self._direct_loss(batch, y).item())
        return {"loss": loss.item(), "nll": loss.item()}

    def _prior(self, n: int, *keys: int) -> np.ndarray:
        rng = stream(self.config.seed, PRIOR, *keys)
        return rng.standard_normal((n, self.config.architecture.d_z))

    def _discriminator_step(self, batch: DatasetBatch, y: np.ndarray, epoch: int, b: int, step: int) -> float:
        model: VaeModel = self.model
        n = len(y)
        # Generated batch is a constant for the discriminator step
        fake = model.decode(model.encode(batch.rasters, batch.objects), self._prior(n, epoch, b, step + 1))
        with Tape() as tape:
            d_real = model.discriminator(y)
            d_fake = model.discriminator(Tensor(fake.data))
            loss = loss_disc(d_real, d_fake)
        self._minimize(tape, loss, self.discriminator_params, self.discriminator_opt, "discriminator", epoch, b)
        correct = int((d_real.data > 0.5).sum()) + int((d_fake.data < 0.5).sum())
        return correct / (2.0 * n)

    def _generator_loss(self, batch: DatasetBatch, y: np.ndarray, epoch: int, b: int) -> Tuple[Tensor, Dict[str, float]]:
        model: VaeModel = self.model
        n = len(y)
        stats: Dict[str, float] = {}
        x = model.encode(batch.rasters, batch.objects)
        terms = []
        if self.alpha > 0.0:
            eta_rng = stream(self.config.seed, RECOGNITION_NOISE, epoch, b)
            eta = eta_rng.standard_normal((n, self.config.architecture.d_z))
            y_hat, latent = model.reconstruct(x, y, eta)
            l_vae = loss_vae(y_hat, y, latent, self.config.obs_variance) * (1.0 / n)
            stats["l_vae"] = l_vae.item()
            terms.append(l_vae)
        if self.config.variant.uses_discriminator:
            generated = model.decode(x, self._prior(n, epoch, b))
            l_adv = loss_adv(model.discriminator(generated))
            stats["l_adv"] = l_adv.item()
            terms.append(l_adv)
        loss = loss_mixed(terms[0], terms[1], self.alpha) if len(terms) == 2 else terms[0]
        return loss, stats

    def _generator_step(self, batch: DatasetBatch, y: np.ndarray, epoch: int, b: int) -> Dict[str, float]:
        with Tape() as tape:
            loss, stats = self._generator_loss(batch, y, epoch, b)
        self._minimize(tape, loss, self.generator_params, self.generator_opt, "generator", epoch, b,
                       objective=lambda: self._generator_loss(batch, y, epoch, b)[0].item())
        stats["loss"] = loss.item()
        return stats

    def _epoch(self, dataset: Dataset, epoch: int) -> TrainLogRecord:
        started = time.perf_counter()
        order = stream(self.config.seed, SHUFFLE, epoch).permutation(len(dataset))
        size = self.config.batch_size
        totals: Dict[str, List[float]] = {}
        for b, start in enumerate(range(0, len(order), size)):
            batch = dataset.batch(order[start:start + size])
            y = normalize_power(batch.power, dataset.spec)
            try:
                if not self.config.variant.is_vae:
                    stats = self._direct_step(batch, y, epoch, b)
                else:
                    if self.config.variant.uses_discriminator:
                        accuracy = [self._discriminator_step(batch, y, epoch, b, s)
                                    for s in range(self.config.discriminator_steps)]
                        totals.setdefault("disc_accuracy", []).append(float(np.mean(accuracy)))
                    stats = self._generator_step(batch, y, epoch, b)
            except NonFiniteError as e:
                raise TrainingDivergedError(e.tensor_name, epoch, b) from e
            for key, value in stats.items():
                totals.setdefault(key, []).append(value)

        means = {key: float(np.mean(values)) for key, values in totals.items()}
        record = TrainLogRecord(
            epoch=epoch,
            loss=means["loss"],
            l_vae=means.get("l_vae"),
            l_adv=means.get("l_adv"),
            nll=means.get("nll"),
            disc_accuracy=means.get("disc_accuracy"),
            wall_time_s=time.perf_counter() - started,
        )
        record_epoch(self.config.variant.value, record.loss, record.wall_time_s)
        return record

    def metadata(self, epochs_done: int, dataset_hash: str) -> TrainingMetadata:
        return TrainingMetadata(
            seed=self.config.seed,
            epochs=epochs_done,
            alpha=self.alpha if self.config.variant.is_vae else None,
            obs_variance=self.config.obs_variance,
            split_fraction=self.config.split_fraction,
            dataset_hash=dataset_hash,
            train_config=self.config.model_dump(mode="json"),
        )

    def train(self, dataset: Dataset, checkpoint_path: Optional[Union[str, Path]] = None,
              dataset_hash: Optional[str] = None) -> TrainResult:
        """
        Run ``config.epochs`` epochs over ``dataset``.

        Args:
            dataset: Training frames (nonempty)
            checkpoint_path: Final checkpoint path; intermediate checkpoints go
                next to it every ``checkpoint_every`` epochs
            dataset_hash: Fingerprint recorded in the checkpoint (computed when omitted)

        Returns:
            TrainResult with the trained model, its checkpoint header and the log
        """
        if len(dataset) == 0:
            raise ConfigError("cannot train on an empty dataset")
        dataset_hash = dataset_hash or dataset.fingerprint()
        log = TrainLog(config=self.config)
        variant = self.config.variant.value
        logger.info(f"Training {variant} on {len(dataset)} frames for {self.config.epochs} epochs "
                    f"(batch {self.config.batch_size}, seed {self.config.seed})")

        for epoch in range(1, self.config.epochs + 1):
            record = self._epoch(dataset, epoch)
            log.append(record)
            parts = [f"loss={record.loss:.4f}"]
            if record.l_vae is not None:
                parts.append(f"l_vae={record.l_vae:.4f}")
            if record.l_adv is not None:
                parts.append(f"l_adv={record.l_adv:.4f}")
            if record.disc_accuracy is not None:
                parts.append(f"disc_acc={record.disc_accuracy:.3f}")
            logger.info(f"Epoch {epoch}/{self.config.epochs} {' '.join(parts)} ({record.wall_time_s:.2f}s)")

            every = self.config.checkpoint_every
            if checkpoint_path and every and epoch % every == 0 and epoch < self.config.epochs:
                save_model(epoch_checkpoint_path(checkpoint_path, epoch), self.model,
                           self.metadata(epoch, dataset_hash))

        if self.rejected_steps:
            logger.info(f"{self.rejected_steps} updates found no loss decrease and were skipped")
        metadata = self.metadata(self.config.epochs, dataset_hash)
        if checkpoint_path:
            header = save_model(checkpoint_path, self.model, metadata)
        else:
            header = checkpoint_header(self.model, metadata)
        return TrainResult(self.model, header, log)


def train(dataset: Dataset, config: TrainConfig, checkpoint_path: Optional[Union[str, Path]] = None,
          dataset_hash: Optional[str] = None) -> TrainResult:
    """Build a fresh model for ``config`` on the dataset's grid and train it."""
    model = build_model(config.variant, config.architecture, dataset.spec, seed=config.seed)
    return Trainer(config, model).train(dataset, checkpoint_path, dataset_hash)
