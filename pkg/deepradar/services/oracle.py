"""
Synthetic radar oracle.

Generates random runway scenes (a straight road corridor flanked by grass
with up to a few targets on it) and ground-truth radar frames with range
decay, class-dependent returns, ghost returns, occlusion and roadside
clutter. Every frame is a pure function of (config, seed, frame index).
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from typing import List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict
from scipy import ndimage

from deepradar.config import config_hash, settings
from deepradar.errors import ConfigError
from deepradar.models.oracle import OracleConfig
from deepradar.models.scene import TARGET_CLASSES, CorridorGeometry, ObjectClass, SceneObject
from deepradar.scene.dataset import Dataset, DatasetManifest
from deepradar.scene.grid import RadarFrame, SceneRaster, rasterize_terrain, render_points
from deepradar.scene.objects import OBJECT_CAPACITY, encode_object_list
from deepradar.utils.monitoring.metrics import CLUTTER_POINTS, FRAMES_GENERATED
from deepradar.utils.random_streams import ORACLE_FRAME, stream

logger = logging.getLogger(__name__)

# Objects sit within this fraction of the corridor half-width
LATERAL_FRACTION = 0.8
MAX_PLACEMENT_ATTEMPTS = 1000
PROGRESS_EVERY = 500


class Scene(BaseModel):
    """Conditioning inputs of one frame plus the corridor they came from."""
    model_config = ConfigDict(frozen=True)

    raster: SceneRaster
    corridor: CorridorGeometry
    objects: List[SceneObject]


def _f32(value: float) -> float:
    # Scenes are stored as float32; simulate on the stored values
    return float(np.float32(value))


def _place_object(config: OracleConfig, corridor: CorridorGeometry, raster: SceneRaster,
                  rng: np.random.Generator) -> Optional[Tuple[float, float]]:
    """Rejection-sample an on-road position inside the field of view."""
    grid = config.grid
    for _ in range(MAX_PLACEMENT_ATTEMPTS):
        r = rng.uniform(config.object_range_min_m, config.object_range_max_m)
        lateral = rng.uniform(-LATERAL_FRACTION, LATERAL_FRACTION) * corridor.half_width
        if abs(lateral) >= r:
            continue
        along = math.sqrt(r * r - lateral * lateral)
        x = _f32(along * math.cos(corridor.heading) - lateral * math.sin(corridor.heading))
        y = _f32(along * math.sin(corridor.heading) + lateral * math.cos(corridor.heading))
        i, j, inside = grid.cell_index(math.hypot(x, y), math.atan2(y, x))
        if inside and raster.road[int(i), int(j)]:
            return x, y
    return None


def sample_scene(config: OracleConfig, rng: np.random.Generator) -> Scene:
    """
    Draw a corridor and 0..k on-road objects.

    Args:
        config: Oracle configuration
        rng: Random generator owned by this frame

    Returns:
        Scene with raster, corridor and objects (nearest first is not implied)
    """
    corridor = CorridorGeometry(
        heading=rng.uniform(-config.heading_bias_max_rad, config.heading_bias_max_rad),
        half_width=rng.uniform(config.half_width_min_m, config.half_width_max_m),
    )
    raster = rasterize_terrain(corridor, config.grid)

    n_objects = int(rng.choice(len(config.object_count_probs), p=config.object_count_probs))
    objects: List[SceneObject] = []
    for _ in range(n_objects):
        object_class = TARGET_CLASSES[int(rng.choice(len(TARGET_CLASSES), p=config.class_probs))]
        position = _place_object(config, corridor, raster, rng)
        if position is None:
            logger.warning(f"Could not place a {object_class.value} on the road; skipping it")
            continue
        if object_class is ObjectClass.CAR:
            reverse = rng.random() < 0.5
            heading = math.remainder(corridor.heading + (math.pi if reverse else 0.0), 2 * math.pi)
            speed = rng.uniform(0.0, config.max_car_speed_mps)
        else:
            heading = rng.uniform(-math.pi, math.pi)
            speed = 0.0
        objects.append(SceneObject(x=position[0], y=position[1], theta=_f32(heading), speed=_f32(speed),
                                   object_class=object_class))
    return Scene(raster=raster, corridor=corridor, objects=objects)


def _occluders(target: SceneObject, objects: List[SceneObject], config: OracleConfig) -> int:
    """Number of nearer objects whose angular footprint covers the target's azimuth."""
    count = 0
    for other in objects:
        if other is target or other.range >= target.range:
            continue
        half_angle = math.atan(config.signature(other.object_class).width_m / 2.0 / other.range)
        if abs(target.azimuth - other.azimuth) <= half_angle:
            count += 1
    return count


def _target_points(scene: Scene, config: OracleConfig, rng: np.random.Generator) -> List[Tuple[float, float, float]]:
    points = []
    step = config.grid.azimuth_step
    for obj in scene.objects:
        signature = config.signature(obj.object_class)
        r, theta = obj.range, obj.azimuth
        base = signature.p0_db - 40.0 * math.log10(r) - config.occlusion_db * _occluders(obj, scene.objects, config)

        n_returns = int(rng.integers(signature.min_returns, signature.max_returns + 1))
        for k in range(n_returns):
            offset = 0 if k == 0 else int(rng.integers(-signature.spread_cells, signature.spread_cells + 1))
            power = base + rng.normal(0.0, config.speckle_std_db)
            points.append((r, theta + offset * step, power))

        if rng.random() < config.ghost_probability:
            ghost_r = r + rng.uniform(config.ghost_range_offset_min_m, config.ghost_range_offset_max_m)
            attenuation = rng.uniform(config.ghost_attenuation_min_db, config.ghost_attenuation_max_db)
            points.append((ghost_r, theta, base - attenuation + rng.normal(0.0, config.speckle_std_db)))
    return points


def clutter_band(raster: SceneRaster, band_cells: int) -> np.ndarray:
    """Grass cells within ``band_cells`` cells (Chebyshev) of a road cell."""
    if band_cells == 0:
        return np.zeros(raster.road.shape, dtype=bool)
    structure = np.ones((2 * band_cells + 1, 2 * band_cells + 1), dtype=bool)
    near_road = ndimage.binary_dilation(raster.road, structure=structure)
    return near_road & raster.grass


def _clutter_points(scene: Scene, config: OracleConfig, rng: np.random.Generator) -> List[Tuple[float, float, float]]:
    n_points = int(rng.poisson(config.clutter_rate))
    if n_points == 0:
        return []
    cells = np.argwhere(clutter_band(scene.raster, config.clutter_band_cells))
    if len(cells) == 0:
        logger.debug("No grass cells near the road; clutter skipped")
        return []
    picks = cells[rng.integers(0, len(cells), size=n_points)]
    powers = rng.normal(config.clutter_mean_db, config.clutter_std_db, size=n_points)
    r_centers = config.grid.range_centers()
    az_centers = config.grid.azimuth_centers()
    CLUTTER_POINTS.inc(n_points)
    return [(float(r_centers[i]), float(az_centers[j]), float(p)) for (i, j), p in zip(picks, powers)]


def radar_points(scene: Scene, config: OracleConfig, rng: np.random.Generator) -> List[Tuple[float, float, float]]:
    """Target, ghost and clutter returns as (r, theta, power_db) points."""
    return _target_points(scene, config, rng) + _clutter_points(scene, config, rng)


def simulate_radar(scene: Scene, config: OracleConfig, rng: np.random.Generator) -> RadarFrame:
    """
    Render the ground-truth radar frame of a scene.

    Each object return has power P0_class - 40 log10 r + speckle, less the
    occlusion attenuation; the first return sits at the object's center.
    """
    return render_points(radar_points(scene, config, rng), config.grid)


def generate_frame(config: OracleConfig, seed: int, index: int) -> Tuple[Scene, RadarFrame]:
    rng = stream(seed, ORACLE_FRAME, index)
    scene = sample_scene(config, rng)
    frame = simulate_radar(scene, config, rng)
    FRAMES_GENERATED.inc()
    if index and index % PROGRESS_EVERY == 0:
        logger.info(f"Generated frame {index}")
    return scene, frame


def generate_dataset(n_frames: int, config: OracleConfig, seed: Optional[int] = None,
                     workers: Optional[int] = None) -> Dataset:
    """
    Generate ``n_frames`` i.i.d. frames.

    Frames may be produced by several threads; each uses its own random
    stream and results are ordered by index, so the output does not depend
    on ``workers``.

    Args:
        n_frames: Number of frames (>= 1)
        config: Oracle configuration
        seed: Seed (defaults to config.seed)
        workers: Thread count (defaults to settings.WORKERS)

    Returns:
        In-memory dataset
    """
    if n_frames < 1:
        raise ConfigError("frames must be ≥ 1")
    seed = config.seed if seed is None else seed
    workers = max(1, workers or settings.WORKERS)
    logger.info(f"Generating {n_frames} frames (seed {seed}, {workers} workers)")

    if workers == 1:
        results = [generate_frame(config, seed, i) for i in range(n_frames)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda i: generate_frame(config, seed, i), range(n_frames)))

    grid = config.grid
    manifest = DatasetManifest(
        n_frames=n_frames,
        grid=grid,
        generator_hash=config_hash(config, exclude={"seed"}),
        seed=seed,
        generator=config.model_dump(mode="json", exclude={"seed"}),
    )
    return Dataset(
        manifest,
        np.stack([scene.raster.layers for scene, _ in results]),
        np.stack([encode_object_list(scene.objects, OBJECT_CAPACITY) for scene, _ in results]),
        np.stack([frame.power for _, frame in results]),
    )
