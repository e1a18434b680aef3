import math

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from deepradar.config import build_config
from deepradar.errors import ConfigError
from deepradar.models.oracle import OracleConfig
from deepradar.models.scene import TARGET_CLASSES, CorridorGeometry, ObjectClass, SceneObject
from deepradar.scene.dataset import encode_dataset
from deepradar.scene.grid import rasterize_terrain
from deepradar.services.evaluation.metrics import (
    extract_ccr_returns,
    extract_clutter,
    fit_range_power,
    range_fit_residual,
)
from deepradar.services.oracle import (
    Scene,
    clutter_band,
    generate_dataset,
    generate_frame,
    sample_scene,
    simulate_radar,
)
from deepradar.utils.random_streams import ORACLE_FRAME, stream


def make_scene(config, objects, half_width=5.0):
    corridor = CorridorGeometry(heading=0.0, half_width=half_width)
    return Scene(raster=rasterize_terrain(corridor, config.grid), corridor=corridor, objects=objects)


def power_at(frame, r, theta):
    i, j, _ = frame.spec.cell_index(r, theta)
    return float(frame.power[int(i), int(j), 0])


@pytest.fixture
def quiet():
    return OracleConfig().noise_free()


def test_noise_free_ccr_follows_range_equation(quiet):
    near = simulate_radar(make_scene(quiet, [SceneObject(x=10.0, y=0.0, object_class=ObjectClass.CCR)]),
                          quiet, np.random.default_rng(0))
    assert near.power.max() == -50.0
    assert power_at(near, 10.0, 0.0) == -50.0

    far = simulate_radar(make_scene(quiet, [SceneObject(x=20.0, y=0.0, object_class=ObjectClass.CCR)]),
                         quiet, np.random.default_rng(0))
    assert far.power.max() == pytest.approx(-62.0412, abs=1e-4)
    assert near.power.max() - far.power.max() == pytest.approx(40 * math.log10(2), abs=1e-4)


def test_empty_quiet_scene_is_floor(quiet):
    frame = simulate_radar(make_scene(quiet, []), quiet, np.random.default_rng(0))
    assert np.all(frame.power == -90.0)


def test_nearer_object_occludes(quiet):
    objects = [
        SceneObject(x=10.0, y=0.0, object_class=ObjectClass.CAR),
        SceneObject(x=20.0, y=0.0, object_class=ObjectClass.CCR),
    ]
    frame = simulate_radar(make_scene(quiet, objects), quiet, np.random.default_rng(0))
    expected = -10.0 - 40 * math.log10(20.0) - quiet.occlusion_db
    assert power_at(frame, 20.0, 0.0) == pytest.approx(expected, abs=1e-4)


def test_class_base_power(quiet):
    for object_class, p0 in ((ObjectClass.METAL_FRAME, -22.0), (ObjectClass.PELLETS_BAG, -35.0)):
        scene = make_scene(quiet, [SceneObject(x=10.0, y=0.0, object_class=object_class)])
        frame = simulate_radar(scene, quiet, np.random.default_rng(1))
        assert frame.power.max() == pytest.approx(p0 - 40.0, abs=1e-4)


def test_clutter_lands_on_grass_near_road():
    config = OracleConfig(clutter_rate=200.0, speckle_std_db=0.0, ghost_probability=0.0)
    scene = make_scene(config, [])
    frame = simulate_radar(scene, config, np.random.default_rng(4))
    hot = frame.power[..., 0] > config.grid.floor_db
    assert hot.any()
    band = clutter_band(scene.raster, config.clutter_band_cells)
    assert np.all(band[hot])
    assert not np.any(scene.raster.road[hot])


def test_ghost_return_sits_behind_target(quiet):
    config = quiet.model_copy(update={"ghost_probability": 1.0})
    scene = make_scene(config, [SceneObject(x=10.0, y=0.0, object_class=ObjectClass.CCR)])
    frame = simulate_radar(scene, config, np.random.default_rng(2))
    r_centers = config.grid.range_centers()
    hot_rows = np.unique(np.nonzero(frame.power[..., 0] > config.grid.floor_db)[0])
    assert len(hot_rows) == 2
    assert r_centers[hot_rows[1]] > 10.0 + config.ghost_range_offset_min_m - config.grid.range_step
    assert frame.power.max() == -50.0


def test_sampled_objects_sit_on_road():
    config = OracleConfig(object_count_probs=[0.0, 0.0, 0.0, 1.0])
    for index in range(1000):
        scene = sample_scene(config, stream(9, ORACLE_FRAME, index))
        assert len(scene.objects) == 3
        for obj in scene.objects:
            i, j, inside = config.grid.cell_index(obj.range, obj.azimuth)
            assert inside
            assert scene.raster.road[int(i), int(j)]
            if obj.object_class is ObjectClass.CAR:
                assert 0.0 <= obj.speed <= config.max_car_speed_mps
            else:
                assert obj.speed == 0.0


def test_frame_generation_is_deterministic():
    config = OracleConfig()
    scene_a, frame_a = generate_frame(config, seed=11, index=4)
    scene_b, frame_b = generate_frame(config, seed=11, index=4)
    assert scene_a.objects == scene_b.objects
    assert_array_equal(frame_a.power, frame_b.power)
    assert_array_equal(scene_a.raster.layers, scene_b.raster.layers)


def test_dataset_generation_is_deterministic_across_workers(tiny_oracle):
    serial = generate_dataset(16, tiny_oracle, seed=7, workers=1)
    threaded = generate_dataset(16, tiny_oracle, seed=7, workers=4)
    assert encode_dataset(serial) == encode_dataset(threaded)


def test_seeds_change_frames(tiny_oracle):
    a = generate_dataset(8, tiny_oracle, seed=1, workers=1)
    b = generate_dataset(8, tiny_oracle, seed=2, workers=1)
    assert a.manifest.generator_hash == b.manifest.generator_hash
    assert not np.array_equal(a.power, b.power)


def test_stored_objects_match_simulated_scene(tiny_oracle):
    dataset = generate_dataset(6, tiny_oracle, seed=3, workers=1)
    for index in range(6):
        scene, frame = generate_frame(tiny_oracle, 3, index)
        assert dataset.scene_objects(index) == scene.objects
        assert_array_equal(dataset.power[index], frame.power)


def test_zero_frames_rejected(tiny_oracle):
    with pytest.raises(ConfigError, match="frames must be ≥ 1"):
        generate_dataset(0, tiny_oracle)


def test_config_validation():
    with pytest.raises(ConfigError, match="class_probs"):
        build_config(OracleConfig, {"class_probs": "0.5,0.5"})
    with pytest.raises(ConfigError, match="unknown config key 'clutter_rte'"):
        build_config(OracleConfig, {"clutter_rte": "3"})
    config = build_config(OracleConfig, {"car.p0_db": "-12", "clutter_rate": "4"})
    assert config.car.p0_db == -12.0
    assert config.clutter_rate == 4.0
    # untouched fields of the nested section keep their defaults
    assert config.car.spread_cells == 2
    assert config.car.max_returns == 5


@pytest.mark.slow
def test_object_counts_follow_configured_distribution():
    config = OracleConfig()
    n_scenes = 10_000
    counts = np.bincount([len(sample_scene(config, stream(17, ORACLE_FRAME, i)).objects) for i in range(n_scenes)],
                         minlength=len(config.object_count_probs))
    for k, p in enumerate(config.object_count_probs):
        sigma = math.sqrt(n_scenes * p * (1.0 - p))
        assert abs(counts[k] - n_scenes * p) <= 3.0 * sigma, f"{k} objects: {counts[k]}"


@pytest.mark.slow
def test_nearly_every_frame_has_clutter():
    dataset = generate_dataset(5000, OracleConfig(), seed=13)
    with_clutter = sum(len(extract_clutter(dataset.frame(i), dataset.raster(i))) > 0 for i in range(len(dataset)))
    assert with_clutter / len(dataset) >= 0.99


def test_peak_power_decays_with_every_range_bin(quiet):
    grid = quiet.grid
    for object_class in TARGET_CLASSES:
        p0 = quiet.signature(object_class).p0_db
        peaks = np.array([
            simulate_radar(make_scene(quiet, [SceneObject(x=float(r), y=0.0, object_class=object_class)]),
                           quiet, np.random.default_rng(0)).power.max()
            for r in grid.range_centers()
        ])
        expected = p0 - 40.0 * np.log10(grid.range_centers())
        assert_allclose(peaks, np.clip(expected, grid.floor_db, grid.ceil_db), atol=1e-4)
        above_floor = expected > grid.floor_db
        assert above_floor[0]
        assert np.all(np.diff(peaks[above_floor]) < 0), object_class.value


@pytest.mark.slow
def test_mean_cell_power_orders_classes_by_base_power(quiet):
    dataset = generate_dataset(2000, quiet, seed=19)
    powers = {object_class: [] for object_class in TARGET_CLASSES}
    for index in range(len(dataset)):
        for obj in dataset.scene_objects(index):
            i, j, inside = dataset.spec.cell_index(obj.range, obj.azimuth)
            assert inside
            powers[obj.object_class].append(float(dataset.power[index, int(i), int(j), 0]))
    means = {object_class: np.mean(values) for object_class, values in powers.items()}
    by_base_power = sorted(TARGET_CLASSES, key=lambda c: quiet.signature(c).p0_db, reverse=True)
    assert by_base_power == [ObjectClass.CCR, ObjectClass.CAR, ObjectClass.METAL_FRAME, ObjectClass.PELLETS_BAG]
    ordered = [means[object_class] for object_class in by_base_power]
    assert all(a > b for a, b in zip(ordered, ordered[1:])), means


@pytest.mark.slow
def test_single_ccr_frames_recover_configured_p0():
    config = OracleConfig(object_count_probs=[0.0, 1.0], class_probs=[0.0, 1.0, 0.0, 0.0]).noise_free()
    dataset = generate_dataset(400, config, seed=23)
    returns = [point for i in range(len(dataset))
               for point in extract_ccr_returns(dataset.power[i], dataset.scene_objects(i), dataset.spec)]
    assert len(returns) == 400
    p0 = fit_range_power(returns)
    assert abs(p0 - config.ccr.p0_db) < 0.01
    assert range_fit_residual(returns, p0) < 0.01

    # the closed-form fit is the minimizer of the squared residual
    candidates = np.arange(-30.0, 10.0, 0.001)
    ranges, power = np.asarray(returns).T
    errors = [np.sum((power - (c - 40.0 * np.log10(ranges))) ** 2) for c in candidates]
    assert abs(candidates[int(np.argmin(errors))] - p0) <= 0.001
