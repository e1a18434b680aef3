"""
Models for scene geometry: the polar radar grid, road corridors and objects.
"""
import math
from enum import Enum
from typing import Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator


class ObjectClass(str, Enum):
    """Object class enum. Order fixes the one-hot layout."""
    CAR = "car"
    CCR = "ccr"
    PELLETS_BAG = "pellets_bag"
    METAL_FRAME = "metal_frame"
    UNUSED = "unused"

    @property
    def index(self) -> int:
        return list(ObjectClass).index(self)


TARGET_CLASSES = (
    ObjectClass.CAR,
    ObjectClass.CCR,
    ObjectClass.PELLETS_BAG,
    ObjectClass.METAL_FRAME,
)


class PolarGridSpec(BaseModel):
    """
    Range/azimuth grid shared by rasters and radar frames.

    Cell (i, j) covers [range_min + i*dr, +dr) x [az_min + j*dtheta, +dtheta).
    Azimuth grows to the left of boresight (counter-clockwise).
    """
    model_config = ConfigDict(extra="forbid", frozen=True)

    n_range: int = Field(64, ge=2)
    n_azimuth: int = Field(64, ge=2)
    range_min: float = Field(0.5, ge=0.0)
    range_max: float = 75.0
    az_min: float = -math.pi / 4
    az_max: float = math.pi / 4
    floor_db: float = -90.0
    ceil_db: float = 0.0

    @model_validator(mode="after")
    def _check_extents(self) -> "PolarGridSpec":
        if not self.range_max > self.range_min:
            raise ValueError("range_max must exceed range_min")
        if not self.az_max > self.az_min:
            raise ValueError("az_max must exceed az_min")
        if not self.ceil_db > self.floor_db:
            raise ValueError("ceil_db must exceed floor_db")
        return self

    @property
    def shape(self) -> Tuple[int, int]:
        return (self.n_range, self.n_azimuth)

    @property
    def range_step(self) -> float:
        return (self.range_max - self.range_min) / self.n_range

    @property
    def azimuth_step(self) -> float:
        return (self.az_max - self.az_min) / self.n_azimuth

    @property
    def dynamic_range_db(self) -> float:
        return self.ceil_db - self.floor_db

    def range_centers(self) -> np.ndarray:
        return self.range_min + (np.arange(self.n_range) + 0.5) * self.range_step

    def azimuth_centers(self) -> np.ndarray:
        return self.az_min + (np.arange(self.n_azimuth) + 0.5) * self.azimuth_step

    def cell_centers(self) -> Tuple[np.ndarray, np.ndarray]:
        """Range and azimuth of every cell center, each shaped (n_range, n_azimuth)."""
        return np.meshgrid(self.range_centers(), self.azimuth_centers(), indexing="ij")

    def cell_index(self, r, theta) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """
        Map polar coordinates to cell indices.

        Args:
            r: Ranges in meters (scalar or array)
            theta: Azimuths in radians (scalar or array)

        Returns:
            (range index, azimuth index, in-grid mask)
        """
        r = np.asarray(r, dtype=np.float64)
        theta = np.asarray(theta, dtype=np.float64)
        i = np.floor((r - self.range_min) / self.range_step).astype(np.int64)
        j = np.floor((theta - self.az_min) / self.azimuth_step).astype(np.int64)
        inside = (i >= 0) & (i < self.n_range) & (j >= 0) & (j < self.n_azimuth)
        return i, j, inside


class CorridorGeometry(BaseModel):
    """Straight road corridor through the sensor origin."""
    model_config = ConfigDict(extra="forbid", frozen=True)

    # Heading of the centerline relative to boresight, radians
    heading: float = 0.0
    half_width: float = Field(..., gt=0.0)

    def lateral_offset(self, x, y):
        """Signed distance of Cartesian points from the centerline."""
        return -np.asarray(x) * math.sin(self.heading) + np.asarray(y) * math.cos(self.heading)

    def contains(self, x, y):
        return np.abs(self.lateral_offset(x, y)) <= self.half_width


class SceneObject(BaseModel):
    """One object of the object list, in the radar frame."""
    model_config = ConfigDict(extra="forbid", frozen=True)

    x: float
    y: float
    theta: float = 0.0
    speed: float = 0.0
    object_class: ObjectClass

    @property
    def range(self) -> float:
        return math.hypot(self.x, self.y)

    @property
    def azimuth(self) -> float:
        return math.atan2(self.y, self.x)
