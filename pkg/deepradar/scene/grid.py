"""
Polar-grid rasters and radar frames.

Cartesian coordinates follow the radar frame: x along boresight, y to the
left, so azimuth = atan2(y, x).
"""
import logging
from typing import Iterable, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator, model_validator

from deepradar.errors import ShapeError
from deepradar.models.scene import CorridorGeometry, PolarGridSpec

logger = logging.getLogger(__name__)

Point = Tuple[float, float, float]


def _check_grid_shape(kind: str, spec, array) -> None:
    # Runs before pydantic validation, which would wrap ShapeError into ValidationError
    if isinstance(spec, PolarGridSpec) and array is not None:
        expected = spec.shape + (1,)
        if np.shape(array) != expected:
            raise ShapeError(f"{kind} shape {np.shape(array)} does not match grid {expected}")


class SceneRaster(BaseModel):
    """Terrain raster R: 1 marks roadway, 0 grass/offroad. Shape n_range x n_azimuth x 1."""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    spec: PolarGridSpec
    layers: np.ndarray

    def __init__(self, **data):
        _check_grid_shape("raster", data.get("spec"), data.get("layers"))
        super().__init__(**data)

    @field_validator("layers")
    @classmethod
    def _as_float32(cls, value) -> np.ndarray:
        return np.asarray(value, dtype=np.float32)

    @model_validator(mode="after")
    def _check(self) -> "SceneRaster":
        if not np.all((self.layers == 0.0) | (self.layers == 1.0)):
            raise ValueError("raster cells must be 0 (grass) or 1 (road)")
        return self

    @property
    def road(self) -> np.ndarray:
        return self.layers[..., 0] > 0.5

    @property
    def grass(self) -> np.ndarray:
        return ~self.road


class RadarFrame(BaseModel):
    """Observation Y: received power in dB per cell, n_range x n_azimuth x 1."""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    spec: PolarGridSpec
    power: np.ndarray

    def __init__(self, **data):
        _check_grid_shape("frame", data.get("spec"), data.get("power"))
        super().__init__(**data)

    @field_validator("power")
    @classmethod
    def _as_float32(cls, value) -> np.ndarray:
        return np.asarray(value, dtype=np.float32)

    @model_validator(mode="after")
    def _check(self) -> "RadarFrame":
        if self.power.min() < self.spec.floor_db or self.power.max() > self.spec.ceil_db:
            raise ValueError(
                f"frame power outside [{self.spec.floor_db}, {self.spec.ceil_db}] dB: "
                f"[{self.power.min()}, {self.power.max()}]"
            )
        return self

    @classmethod
    def empty(cls, spec: PolarGridSpec) -> "RadarFrame":
        return cls(spec=spec, power=np.full(spec.shape + (1,), spec.floor_db, dtype=np.float32))


def rasterize_terrain(corridor: CorridorGeometry, spec: PolarGridSpec) -> SceneRaster:
    """
    Mark every cell whose center lies inside the road corridor.

    Args:
        corridor: Straight corridor through the origin
        spec: Target polar grid

    Returns:
        Raster with 1 on road cells
    """
    r, theta = spec.cell_centers()
    x = r * np.cos(theta)
    y = r * np.sin(theta)
    road = corridor.contains(x, y)
    return SceneRaster(spec=spec, layers=road[..., np.newaxis].astype(np.float32))


def _as_points(points: Union[np.ndarray, Iterable[Point]]) -> np.ndarray:
    array = np.asarray(list(points) if not isinstance(points, np.ndarray) else points, dtype=np.float64)
    if array.size == 0:
        return np.zeros((0, 3))
    if array.ndim != 2 or array.shape[1] != 3:
        raise ShapeError(f"points must be rows of (r, theta, power_db), got shape {array.shape}")
    return array


def render_points(points: Union[np.ndarray, Sequence[Point]], spec: PolarGridSpec) -> RadarFrame:
    """
    Render (r, theta, power_db) points onto the grid.

    Each cell keeps the strongest point that falls into it; empty cells hold
    floor_db and the result is clamped to [floor_db, ceil_db]. Points outside
    the grid are dropped.
    """
    array = _as_points(points)
    grid = np.full(spec.shape, spec.floor_db, dtype=np.float64)
    if len(array):
        i, j, inside = spec.cell_index(array[:, 0], array[:, 1])
        dropped = int((~inside).sum())
        if dropped:
            logger.debug(f"Dropped {dropped} points outside the grid")
        np.maximum.at(grid, (i[inside], j[inside]), array[inside, 2])
    np.clip(grid, spec.floor_db, spec.ceil_db, out=grid)
    return RadarFrame(spec=spec, power=grid[..., np.newaxis].astype(np.float32))


def normalize_power(power: np.ndarray, spec: PolarGridSpec) -> np.ndarray:
    """Affine map of dB power onto [0, 1]."""
    power = np.asarray(power, dtype=np.float32)
    return (power - np.float32(spec.floor_db)) / np.float32(spec.dynamic_range_db)


def denormalize_power(values: np.ndarray, spec: PolarGridSpec) -> np.ndarray:
    """Inverse of normalize_power, clamped to the grid's dB range."""
    values = np.asarray(values, dtype=np.float32)
    power = values * np.float32(spec.dynamic_range_db) + np.float32(spec.floor_db)
    return np.clip(power, spec.floor_db, spec.ceil_db).astype(np.float32)


def normalize_frame(frame: RadarFrame) -> np.ndarray:
    return normalize_power(frame.power, frame.spec)


def denormalize_frame(values: np.ndarray, spec: PolarGridSpec) -> RadarFrame:
    return RadarFrame(spec=spec, power=denormalize_power(values, spec))
