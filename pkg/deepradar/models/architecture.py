"""
Models describing network architectures and model variants.
"""
from enum import Enum
from typing import List

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


class ModelVariant(str, Enum):
    """The five radar model variants."""
    NORMAL = "normal"
    GMM = "gmm"
    VAE = "vae"
    VAE_ADV = "vae_adv"
    VAE_MIXED = "vae_mixed"

    @classmethod
    def from_cli(cls, name: str) -> "ModelVariant":
        """Accept the CLI spelling (``vae-adv``) as well as the tag (``vae_adv``)."""
        return cls(name.replace("-", "_"))

    @property
    def is_vae(self) -> bool:
        return self in (ModelVariant.VAE, ModelVariant.VAE_ADV, ModelVariant.VAE_MIXED)

    @property
    def uses_discriminator(self) -> bool:
        return self in (ModelVariant.VAE_ADV, ModelVariant.VAE_MIXED)


class ArchitectureConfig(BaseModel):
    """
    Layer sizes for every network. The grid extents must be divisible by
    2**len(conv channels) so the stride-2 stacks invert exactly.
    """
    model_config = ConfigDict(extra="forbid", frozen=True)

    n_range: int = Field(64, ge=2)
    n_azimuth: int = Field(64, ge=2)
    n_objects: int = Field(8, ge=1)
    n_features: int = Field(9, ge=1)

    kernel_size: int = Field(4, ge=1)
    stride: int = Field(2, ge=1)
    padding: int = Field(1, ge=0)

    raster_channels: List[int] = [8, 16, 32]
    object_channels: List[int] = [16, 16]
    encoder_hidden: int = Field(256, ge=1)
    d_x: int = Field(128, ge=1)
    d_z: int = Field(16, ge=1)
    decoder_hidden: int = Field(256, ge=1)
    # Transposed stack channels; the last conv-transpose maps to the head's outputs
    decoder_channels: List[int] = [32, 16, 8]
    recognition_hidden: int = Field(256, ge=1)
    discriminator_channels: List[int] = [8, 16, 32]
    gmm_components: int = Field(3, ge=1)
    # Offset added to ReLU'd GMM log variances
    gmm_logvar_offset: float = 0.01

    @field_validator("raster_channels", "object_channels", "decoder_channels", "discriminator_channels",
                     mode="before")
    @classmethod
    def _split_csv(cls, value):
        # Config files spell lists as "8,16,32"
        if isinstance(value, str):
            value = [int(part) for part in value.split(",") if part.strip()]
        return value

    @model_validator(mode="after")
    def _check_divisibility(self) -> "ArchitectureConfig":
        if not self.object_channels:
            raise ValueError("object_channels must not be empty")
        for name, stack in (
            ("raster_channels", self.raster_channels),
            ("decoder_channels", self.decoder_channels),
            ("discriminator_channels", self.discriminator_channels),
        ):
            if not stack:
                raise ValueError(f"{name} must not be empty")
            factor = self.stride ** len(stack)
            if self.n_range % factor or self.n_azimuth % factor:
                raise ValueError(f"grid {self.n_range}x{self.n_azimuth} is not divisible by {factor} ({name})")
        if self.kernel_size != 2 * self.padding + self.stride:
            raise ValueError("kernel_size must equal 2*padding + stride so each layer scales extents exactly")
        return self

    @property
    def seed_extent(self):
        """Spatial extent of the decoder's reshaped dense output."""
        factor = self.stride ** len(self.decoder_channels)
        return (self.n_range // factor, self.n_azimuth // factor)
