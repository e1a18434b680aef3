"""
Models for training configuration and training logs.
"""
from typing import List, Optional

import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, model_validator

from deepradar.models.architecture import ArchitectureConfig, ModelVariant


class TrainConfig(BaseModel):
    """Hyperparameters of one training run."""
    model_config = ConfigDict(extra="forbid", frozen=True)

    variant: ModelVariant
    # Only meaningful for vae_mixed; vae pins it to 1 and vae_adv to 0
    alpha: Optional[float] = Field(None, ge=0.0, le=1.0)
    obs_variance: float = Field(1.0, gt=0.0)
    batch_size: int = Field(16, ge=1)
    epochs: int = Field(10, ge=1)
    seed: int = 0
    split_fraction: float = Field(0.9, gt=0.0, lt=1.0)
    discriminator_steps: int = Field(1, ge=1)
    # Write an intermediate checkpoint every k epochs (0 disables)
    checkpoint_every: int = Field(0, ge=0)
    rho: float = Field(0.95, gt=0.0, lt=1.0)
    epsilon: float = Field(1e-6, gt=0.0)
    # Halve a rejected generator update up to this many times while it fails to lower
    # the batch loss; 0 applies every ADADELTA update as is
    backtrack_steps: int = Field(0, ge=0)
    architecture: ArchitectureConfig = Field(default_factory=ArchitectureConfig)

    @model_validator(mode="after")
    def _check_alpha(self) -> "TrainConfig":
        if self.alpha is not None and self.variant is not ModelVariant.VAE_MIXED:
            raise ValueError(f"alpha is only meaningful for vae_mixed, not {self.variant.value}")
        return self

    @property
    def effective_alpha(self) -> float:
        """Weight of L_vae in the mixed loss."""
        if self.variant is ModelVariant.VAE_MIXED:
            return 0.99 if self.alpha is None else self.alpha
        if self.variant is ModelVariant.VAE_ADV:
            return 0.0
        return 1.0


class TrainLogRecord(BaseModel):
    """Per-epoch training summary."""
    epoch: int
    loss: float
    l_vae: Optional[float] = None
    l_adv: Optional[float] = None
    nll: Optional[float] = None
    disc_accuracy: Optional[float] = Field(None, ge=0.0, le=1.0)
    wall_time_s: float


class TrainLog(BaseModel):
    """Ordered per-epoch records of one run plus its resolved config."""
    config: TrainConfig
    records: List[TrainLogRecord] = Field(default_factory=list)

    def append(self, record: TrainLogRecord) -> None:
        if self.records and record.epoch <= self.records[-1].epoch:
            raise ValueError("epoch index must increase monotonically")
        self.records.append(record)

    def to_jsonl(self) -> str:
        """Line-delimited JSON: a config header followed by one line per epoch."""
        header = '{"event":"config","config":' + self.config.model_dump_json() + "}"
        lines = [header] + [record.model_dump_json() for record in self.records]
        return "\n".join(lines) + "\n"

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([record.model_dump() for record in self.records])
