"""
Radar models: the five variants behind one sampling interface, plus
checkpoint save/load.
"""
import logging
from abc import ABC, abstractmethod
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from deepradar.autodiff.checkpoint import read_checkpoint, write_checkpoint
from deepradar.autodiff.tensor import Tensor
from deepradar.config import config_hash
from deepradar.errors import CheckpointFormatError, ConfigError
from deepradar.models.architecture import ArchitectureConfig, ModelVariant
from deepradar.models.scene import PolarGridSpec
from deepradar.scene.dataset import DatasetBatch
from deepradar.scene.grid import denormalize_power, normalize_power
from deepradar.services.nets.direct import (
    GmmGridParams,
    GmmHead,
    NormalGridParams,
    NormalHead,
    gmm_nll,
    gmm_sample,
    normal_nll,
    normal_sample,
)
from deepradar.services.nets.discriminator import Discriminator
from deepradar.services.nets.encoder import SceneEncoder
from deepradar.services.nets.layers import Module
from deepradar.services.nets.vae import LatentGaussian, RecognitionNet, VaeDecoder, reparameterize
from deepradar.utils.random_streams import INIT, stream

logger = logging.getLogger(__name__)

Rngs = Sequence[np.random.Generator]


class TrainingMetadata(BaseModel):
    """Provenance of a trained checkpoint."""
    model_config = ConfigDict(extra="forbid")

    seed: int = 0
    epochs: int = 0
    alpha: Optional[float] = None
    obs_variance: float = 1.0
    split_fraction: float = 0.9
    dataset_hash: str = ""
    train_config: Dict = Field(default_factory=dict)


class ModelCheckpoint(BaseModel):
    """Checkpoint header: everything needed to rebuild a model before loading its tensors."""
    model_config = ConfigDict(extra="forbid")

    variant: ModelVariant
    architecture: ArchitectureConfig
    grid: PolarGridSpec
    architecture_hash: str
    metadata: TrainingMetadata = Field(default_factory=TrainingMetadata)


class RadarModel(ABC):
    """
    A sensor model p(Y | R, O) over one polar grid.

    Networks work on normalized power; ``sample_db`` converts draws back to
    clamped dB.
    """

    variant: ModelVariant

    def __init__(self, arch: ArchitectureConfig, grid: PolarGridSpec, seed: int = 0):
        if (arch.n_range, arch.n_azimuth) != grid.shape:
            raise ConfigError(f"architecture grid {arch.n_range}x{arch.n_azimuth} does not match {grid.shape}")
        self.arch = arch
        self.grid = grid
        self.encoder = SceneEncoder(arch, stream(seed, INIT, 0))

    @abstractmethod
    def generator_modules(self) -> List[Tuple[str, Module]]:
        """Named modules optimized on the model loss (encoder first)."""

    def discriminator_modules(self) -> List[Tuple[str, Module]]:
        return []

    def generator_parameters(self) -> Dict[str, Tensor]:
        params: Dict[str, Tensor] = {}
        for name, module in self.generator_modules():
            params.update(module.parameters(f"{name}."))
        return params

    def discriminator_parameters(self) -> Dict[str, Tensor]:
        params: Dict[str, Tensor] = {}
        for name, module in self.discriminator_modules():
            params.update(module.parameters(f"{name}."))
        return params

    def parameters(self) -> Dict[str, Tensor]:
        params = self.generator_parameters()
        params.update(self.discriminator_parameters())
        return params

    def zero_grad(self) -> None:
        for tensor in self.parameters().values():
            tensor.zero_grad()

    def encode(self, rasters: np.ndarray, objects: np.ndarray) -> Tensor:
        return self.encoder(rasters, objects)

    @abstractmethod
    def sample_normalized(self, rasters: np.ndarray, objects: np.ndarray, rngs: Rngs) -> np.ndarray:
        """One deploy-mode draw per frame, normalized units, unclamped."""

    def sample_db(self, batch: DatasetBatch, rngs: Rngs) -> np.ndarray:
        """One draw per frame in dB, clamped to the grid's range. Frame k uses ``rngs[k]``."""
        return denormalize_power(self.sample_normalized(batch.rasters, batch.objects, rngs), self.grid)

    def normalize(self, power_db: np.ndarray) -> np.ndarray:
        return normalize_power(power_db, self.grid)


class NormalModel(RadarModel):
    variant = ModelVariant.NORMAL

    def __init__(self, arch: ArchitectureConfig, grid: PolarGridSpec, seed: int = 0):
        super().__init__(arch, grid, seed)
        self.head = NormalHead(arch, stream(seed, INIT, 1))

    def generator_modules(self):
        return [("encoder", self.encoder), ("head", self.head)]

    def forward(self, rasters: np.ndarray, objects: np.ndarray) -> NormalGridParams:
        return self.head(self.encode(rasters, objects))

    def nll(self, rasters: np.ndarray, objects: np.ndarray, y: np.ndarray) -> Tensor:
        return normal_nll(self.forward(rasters, objects), y)

    def sample_normalized(self, rasters, objects, rngs):
        return normal_sample(self.forward(rasters, objects), rngs)


class GmmModel(RadarModel):
    variant = ModelVariant.GMM

    def __init__(self, arch: ArchitectureConfig, grid: PolarGridSpec, seed: int = 0):
        super().__init__(arch, grid, seed)
        self.head = GmmHead(arch, stream(seed, INIT, 1))

    def generator_modules(self):
        return [("encoder", self.encoder), ("head", self.head)]

    def forward(self, rasters: np.ndarray, objects: np.ndarray) -> GmmGridParams:
        return self.head(self.encode(rasters, objects))

    def nll(self, rasters: np.ndarray, objects: np.ndarray, y: np.ndarray) -> Tensor:
        return gmm_nll(self.forward(rasters, objects), y)

    def sample_normalized(self, rasters, objects, rngs):
        return gmm_sample(self.forward(rasters, objects), rngs)


class VaeModel(RadarModel):
    """
    Conditional VAE. Training draws z from the recognition network; deploy
    mode draws z ~ N(0, I). Adversarial variants also own a discriminator.
    """

    def __init__(self, variant: ModelVariant, arch: ArchitectureConfig, grid: PolarGridSpec, seed: int = 0):
        if not variant.is_vae:
            raise ConfigError(f"{variant.value} is not a VAE variant")
        super().__init__(arch, grid, seed)
        self.variant = variant
        self.recognition = RecognitionNet(arch, stream(seed, INIT, 1))
        self.decoder = VaeDecoder(arch, stream(seed, INIT, 2))
        self.discriminator = Discriminator(arch, stream(seed, INIT, 3)) if variant.uses_discriminator else None

    def generator_modules(self):
        return [("encoder", self.encoder), ("recognition", self.recognition), ("decoder", self.decoder)]

    def discriminator_modules(self):
        return [] if self.discriminator is None else [("discriminator", self.discriminator)]

    def recognize(self, x: Tensor, y: np.ndarray) -> LatentGaussian:
        return self.recognition(x, y)

    def decode(self, x: Tensor, z) -> Tensor:
        return self.decoder(x, z)

    def reconstruct(self, x: Tensor, y: np.ndarray, eta: np.ndarray) -> Tuple[Tensor, LatentGaussian]:
        latent = self.recognize(x, y)
        return self.decode(x, reparameterize(latent, eta)), latent

    def prior_draw(self, rngs: Rngs) -> np.ndarray:
        return np.stack([rng.standard_normal(self.arch.d_z) for rng in rngs])

    def sample_normalized(self, rasters, objects, rngs):
        x = self.encode(rasters, objects)
        return self.decode(x, self.prior_draw(rngs)).data.astype(np.float64)


def build_model(variant: Union[ModelVariant, str], arch: ArchitectureConfig, grid: PolarGridSpec,
                seed: int = 0) -> RadarModel:
    """Construct a freshly initialized model of the given variant."""
    variant = ModelVariant(variant)
    if variant is ModelVariant.NORMAL:
        return NormalModel(arch, grid, seed)
    if variant is ModelVariant.GMM:
        return GmmModel(arch, grid, seed)
    return VaeModel(variant, arch, grid, seed)


def checkpoint_header(model: RadarModel, metadata: Optional[TrainingMetadata] = None) -> ModelCheckpoint:
    return ModelCheckpoint(
        variant=model.variant,
        architecture=model.arch,
        grid=model.grid,
        architecture_hash=config_hash(model.arch),
        metadata=metadata or TrainingMetadata(),
    )


def save_model(path: Union[str, Path], model: RadarModel, metadata: Optional[TrainingMetadata] = None) -> ModelCheckpoint:
    header = checkpoint_header(model, metadata)
    params = {name: tensor.data for name, tensor in model.parameters().items()}
    write_checkpoint(path, header.model_dump(mode="json"), params)
    return header


def restore_model(header: ModelCheckpoint, params: Dict[str, np.ndarray]) -> RadarModel:
    if config_hash(header.architecture) != header.architecture_hash:
        raise CheckpointFormatError("architecture hash does not match the stored architecture")
    model = build_model(header.variant, header.architecture, header.grid)
    expected = model.parameters()
    if set(expected) != set(params):
        missing = sorted(set(expected) - set(params))
        extra = sorted(set(params) - set(expected))
        raise CheckpointFormatError(f"checkpoint tensors do not match {header.variant.value}: "
                                    f"missing {missing[:3]}, unexpected {extra[:3]}")
    for name, tensor in expected.items():
        if params[name].shape != tensor.shape:
            raise CheckpointFormatError(f"tensor '{name}' has shape {params[name].shape}, expected {tensor.shape}")
        tensor.data = params[name].astype(tensor.data.dtype, copy=True)
        tensor.zero_grad()
    return model


def load_model(path: Union[str, Path]) -> Tuple[RadarModel, ModelCheckpoint]:
    raw_header, params = read_checkpoint(path)
    try:
        header = ModelCheckpoint.model_validate(raw_header)
    except ValidationError as e:
        raise CheckpointFormatError(f"invalid checkpoint header: {e.errors()[0]['msg']}") from e
    model = restore_model(header, params)
    logger.info(f"Loaded {header.variant.value} checkpoint {path} ({len(params)} tensors)")
    return model, header
