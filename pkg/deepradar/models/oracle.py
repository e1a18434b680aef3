"""
Models for the synthetic radar oracle configuration.

All numbers here are declared defaults of the simulator, not measurements.
"""
from typing import List, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from deepradar.models.scene import ObjectClass, PolarGridSpec


class ClassSignature(BaseModel):
    """Radar signature of one target class."""
    model_config = ConfigDict(extra="forbid", frozen=True)

    # Base power at 1 m, dB
    p0_db: float
    # Half-width of the azimuth footprint, in cells
    spread_cells: int = Field(0, ge=0)
    # Number of returns per object is uniform on [min_returns, max_returns]
    min_returns: int = Field(1, ge=1)
    max_returns: int = Field(1, ge=1)
    # Physical width used for occlusion, meters
    width_m: float = Field(1.8, gt=0.0)

    @model_validator(mode="after")
    def _check_returns(self) -> "ClassSignature":
        if self.max_returns < self.min_returns:
            raise ValueError("max_returns must be >= min_returns")
        return self


def _probabilities(value):
    if isinstance(value, str):
        value = [float(part) for part in value.split(",") if part.strip()]
    return value


class OracleConfig(BaseModel):
    """Configuration of the synthetic scene and radar generator."""
    model_config = ConfigDict(extra="forbid", frozen=True)

    grid: PolarGridSpec = Field(default_factory=PolarGridSpec)

    car: ClassSignature = ClassSignature(p0_db=-18.0, spread_cells=2, min_returns=2, max_returns=5, width_m=1.8)
    ccr: ClassSignature = ClassSignature(p0_db=-10.0, spread_cells=0, min_returns=1, max_returns=1, width_m=0.3)
    pellets_bag: ClassSignature = ClassSignature(p0_db=-35.0, spread_cells=2, min_returns=1, max_returns=3, width_m=1.8)
    metal_frame: ClassSignature = ClassSignature(p0_db=-22.0, spread_cells=2, min_returns=2, max_returns=4, width_m=1.8)

    # Scene layout
    half_width_min_m: float = Field(3.0, gt=0.0)
    half_width_max_m: float = Field(6.0, gt=0.0)
    heading_bias_max_rad: float = Field(0.05, ge=0.0)
    object_range_min_m: float = Field(5.0, gt=0.0)
    object_range_max_m: float = Field(70.0, gt=0.0)
    # P(0), P(1), ... objects per scene
    object_count_probs: List[float] = [0.25, 0.25, 0.25, 0.25]
    # Sampling weights over car, ccr, pellets_bag, metal_frame
    class_probs: List[float] = [0.25, 0.25, 0.25, 0.25]
    max_car_speed_mps: float = Field(15.0, ge=0.0)

    # Radar effects
    speckle_std_db: float = Field(2.0, ge=0.0)
    ghost_probability: float = Field(0.15, ge=0.0, le=1.0)
    ghost_range_offset_min_m: float = Field(3.0, ge=0.0)
    ghost_range_offset_max_m: float = Field(15.0, ge=0.0)
    ghost_attenuation_min_db: float = Field(6.0, ge=0.0)
    ghost_attenuation_max_db: float = Field(12.0, ge=0.0)
    occlusion_db: float = Field(15.0, ge=0.0)

    # Roadside clutter
    clutter_rate: float = Field(12.0, ge=0.0)
    clutter_mean_db: float = -72.0
    clutter_std_db: float = Field(6.0, ge=0.0)
    clutter_band_cells: int = Field(2, ge=0)

    seed: int = 0

    @field_validator("object_count_probs", "class_probs", mode="before")
    @classmethod
    def _split_csv(cls, value):
        return _probabilities(value)

    @field_validator("object_count_probs", "class_probs")
    @classmethod
    def _check_distribution(cls, value: List[float]) -> List[float]:
        if not value or any(p < 0.0 or p > 1.0 for p in value):
            raise ValueError("probabilities must lie in [0, 1]")
        if abs(sum(value) - 1.0) > 1e-6:
            raise ValueError("probabilities must sum to 1")
        return value

    @field_validator("class_probs")
    @classmethod
    def _check_class_count(cls, value: List[float]) -> List[float]:
        if len(value) != 4:
            raise ValueError("class_probs needs one weight per target class (4)")
        return value

    @model_validator(mode="after")
    def _check_ranges(self) -> "OracleConfig":
        pairs: Tuple[Tuple[str, str], ...] = (
            ("half_width_min_m", "half_width_max_m"),
            ("object_range_min_m", "object_range_max_m"),
            ("ghost_range_offset_min_m", "ghost_range_offset_max_m"),
            ("ghost_attenuation_min_db", "ghost_attenuation_max_db"),
        )
        for low, high in pairs:
            if getattr(self, high) < getattr(self, low):
                raise ValueError(f"{high} must be >= {low}")
        if len(self.object_count_probs) - 1 > 8:
            raise ValueError("object_count_probs allows more objects than the list capacity (8)")
        return self

    def signature(self, object_class: ObjectClass) -> ClassSignature:
        if object_class is ObjectClass.UNUSED:
            raise ValueError("unused rows have no radar signature")
        return getattr(self, object_class.value)

    def noise_free(self) -> "OracleConfig":
        """Copy with speckle, ghosts and clutter disabled."""
        return self.model_copy(update={"speckle_std_db": 0.0, "ghost_probability": 0.0, "clutter_rate": 0.0})
