import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from deepradar.errors import ConfigError, DataIOError, ShapeError
from deepradar.models.oracle import OracleConfig
from deepradar.models.report import ClutterPoint, EvalReport, PiecewiseUniformHist
from deepradar.models.scene import CorridorGeometry, ObjectClass, SceneObject
from deepradar.scene.grid import RadarFrame, rasterize_terrain
from deepradar.services.evaluation.comparison import (
    load_report,
    ordering_checks,
    reports_frame,
    summarize,
    write_summary,
)
from deepradar.services.evaluation.evaluator import ReplayModel, draw_samples, evaluate, expected_rmse
from deepradar.services.evaluation.metrics import (
    clutter_histograms,
    extract_ccr_returns,
    extract_clutter,
    fit_range_power,
    histogram_kl,
    rmse_db,
)
from deepradar.services.nets.radar_model import build_model
from deepradar.services.oracle import Scene, generate_dataset, simulate_radar


def hist(counts, low=0.0, high=1.0):
    return PiecewiseUniformHist(low=low, high=high, n_bins=len(counts), counts=counts)


class FloorModel:
    variant_name = "floor"

    def sample_db(self, batch, rngs):
        return np.full_like(batch.power, -90.0)


# =============================================================================
# RMSE
# =============================================================================

def test_rmse_of_uniform_offset():
    truth = np.zeros((1, 2, 2, 1))
    assert rmse_db(truth, truth + 1.0) == pytest.approx(1.0)


def test_rmse_pools_cells_before_root():
    truth = np.zeros((2, 2, 2, 1))
    predicted = np.stack([np.zeros((2, 2, 1)), np.full((2, 2, 1), 2.0)])
    assert rmse_db(truth, predicted) == pytest.approx(math.sqrt(2.0), abs=1e-4)


def test_rmse_rejects_mismatched_or_empty_inputs():
    with pytest.raises(ShapeError):
        rmse_db(np.zeros((1, 2)), np.zeros((2, 1)))
    with pytest.raises(ConfigError):
        rmse_db(np.zeros(0), np.zeros(0))


# =============================================================================
# Range equation fit
# =============================================================================

def test_fit_single_point_at_one_metre():
    assert fit_range_power([(1.0, -50.0)]) == -50.0


def test_fit_two_points_on_the_curve():
    assert fit_range_power([(10.0, -40.0), (20.0, -52.0412)]) == pytest.approx(0.0, abs=1e-4)


def test_fit_matches_grid_search(rng):
    r = rng.uniform(5.0, 70.0, size=20)
    p = -30.0 - 40.0 * np.log10(r) + rng.normal(0.0, 3.0, size=20)
    closed = fit_range_power(list(zip(r, p)))
    candidates = np.arange(-100.0, 0.0, 0.01)
    errors = ((p[None, :] - (candidates[:, None] - 40.0 * np.log10(r)[None, :])) ** 2).sum(axis=1)
    assert abs(candidates[np.argmin(errors)] - closed) <= 0.01


def test_fit_is_translation_equivariant(rng):
    points = [(float(r), float(p)) for r, p in zip(rng.uniform(5, 70, 8), rng.uniform(-90, -20, 8))]
    shifted = [(r, p + 7.5) for r, p in points]
    assert fit_range_power(shifted) == pytest.approx(fit_range_power(points) + 7.5, abs=1e-9)


def test_fit_rejects_empty_and_nonpositive_ranges():
    with pytest.raises(ConfigError):
        fit_range_power([])
    with pytest.raises(ConfigError):
        fit_range_power([(0.0, -50.0)])


# =============================================================================
# CCR and clutter extraction
# =============================================================================

def quiet_scene(config, objects):
    corridor = CorridorGeometry(heading=0.0, half_width=5.0)
    return Scene(raster=rasterize_terrain(corridor, config.grid), corridor=corridor, objects=objects)


def test_ccr_return_from_noise_free_frame():
    config = OracleConfig().noise_free()
    scene = quiet_scene(config, [SceneObject(x=10.0, y=0.0, object_class=ObjectClass.CCR)])
    frame = simulate_radar(scene, config, np.random.default_rng(0))
    returns = extract_ccr_returns(frame.power, scene.objects, config.grid)
    assert returns == [(10.0, -50.0)]


def test_frames_without_ccr_contribute_nothing(grid):
    car = SceneObject(x=10.0, y=0.0, object_class=ObjectClass.CAR)
    assert extract_ccr_returns(RadarFrame.empty(grid).power, [car], grid) == []


def test_ccr_window_clipped_at_border(grid):
    theta = grid.az_max - 1e-3
    power = np.full(grid.shape, grid.floor_db)
    i, j, _ = grid.cell_index(10.0, theta)
    assert int(j) == grid.n_azimuth - 1
    power[int(i), int(j)] = -33.0
    ccr = SceneObject(x=10.0 * math.cos(theta), y=10.0 * math.sin(theta), object_class=ObjectClass.CCR)
    assert extract_ccr_returns(power, [ccr], grid) == [(pytest.approx(10.0), -33.0)]


@pytest.fixture
def corridor_raster(grid):
    return rasterize_terrain(CorridorGeometry(heading=0.0, half_width=5.0), grid)


def test_floor_frame_has_no_clutter(grid, corridor_raster):
    assert extract_clutter(RadarFrame.empty(grid), corridor_raster) == []


def test_only_grass_cells_count_as_clutter(grid, corridor_raster):
    power = np.where(corridor_raster.road, -20.0, grid.floor_db)
    grass = np.argwhere(corridor_raster.grass)[0]
    power[grass[0], grass[1]] = -60.0
    points = extract_clutter(RadarFrame(spec=grid, power=power[..., np.newaxis]), corridor_raster)
    assert points == [ClutterPoint(r=float(grid.range_centers()[grass[0]]),
                                   theta=float(grid.azimuth_centers()[grass[1]]),
                                   power=-60.0)]


def test_unreachable_threshold(grid, corridor_raster):
    frame = RadarFrame(spec=grid, power=np.full(grid.shape + (1,), -5.0))
    assert extract_clutter(frame, corridor_raster, threshold_db=grid.ceil_db) == []


def test_clutter_never_on_road(dataset):
    for pos in range(len(dataset)):
        raster = dataset.raster(pos)
        for point in extract_clutter(dataset.frame(pos), raster):
            i, j, _ = dataset.spec.cell_index(point.r, point.theta)
            assert not raster.road[int(i), int(j)]


# =============================================================================
# Histogram KL
# =============================================================================

def test_identical_histograms_have_zero_kl():
    h = hist([3, 1, 0, 6])
    assert histogram_kl(h, h) == pytest.approx(0.0, abs=1e-12)


def test_kl_direct_sum():
    value = histogram_kl(hist([2, 2]), hist([1, 3]))
    assert value == pytest.approx(0.5 * math.log(2) + 0.5 * math.log(2 / 3), abs=1e-4)
    assert value == pytest.approx(0.1438, abs=1e-4)


def test_kl_with_empty_bin_stays_finite():
    assert histogram_kl(hist([4, 0]), hist([1, 1])) == pytest.approx(math.log(2), abs=1e-4)


def test_kl_is_nonnegative(rng):
    for _ in range(100):
        p = hist(rng.integers(0, 20, size=8).tolist())
        q = hist(rng.integers(0, 20, size=8).tolist())
        assert histogram_kl(p, q) >= 0.0


def test_kl_rejects_different_binning():
    with pytest.raises(ConfigError):
        histogram_kl(hist([1, 1]), hist([1, 1, 1]))
    with pytest.raises(ConfigError):
        histogram_kl(hist([1, 1]), hist([1, 1], high=2.0))


def test_histogram_binning(grid):
    points = [ClutterPoint(r=10.0, theta=0.1, power=-60.0), ClutterPoint(r=70.0, theta=-0.5, power=-30.0)]
    hists = clutter_histograms(points, grid)
    assert hists.n_points == 2
    assert hists.distance.binning == (0.0, grid.range_max, 32)
    assert hists.angle.total == 2
    assert hists.power.occupied_bins == 2


# =============================================================================
# Evaluation protocol
# =============================================================================

def test_replay_model_is_a_perfect_predictor(dataset):
    report = evaluate(ReplayModel(), dataset, seed=0)
    assert report.variant == "replay"
    assert report.rmse_db == 0.0
    assert report.p0_model_db == report.p0_truth_db
    assert report.kl_distance == pytest.approx(0.0, abs=1e-12)
    assert report.kl_angle == pytest.approx(0.0, abs=1e-12)
    assert report.kl_power == pytest.approx(0.0, abs=1e-12)
    assert report.n_frames == len(dataset)


def test_report_is_deterministic(tiny_arch, tiny_grid, tiny_dataset):
    model = build_model("gmm", tiny_arch, tiny_grid, seed=2)
    first = evaluate(model, tiny_dataset, seed=9).model_dump_json()
    second = evaluate(model, tiny_dataset, seed=9).model_dump_json()
    assert first == second


def test_floor_model_gets_finite_divergence():
    config = OracleConfig(clutter_rate=40.0)
    data = generate_dataset(3, config, seed=1, workers=1)
    report = evaluate(FloorModel(), data, seed=0)
    assert report.clutter_model.n_points == 0
    assert report.clutter_truth.n_points > 0
    for value in (report.kl_distance, report.kl_angle, report.kl_power):
        assert math.isfinite(value)
        assert value > 0.0
    assert report.rmse_db > 0.0


def test_rmse_ignores_frame_order(tiny_arch, tiny_grid, tiny_dataset):
    model = build_model("vae_mixed", tiny_arch, tiny_grid, seed=5)
    forward = expected_rmse(model, tiny_dataset, seed=4)
    backward = expected_rmse(model, tiny_dataset.subset(list(range(len(tiny_dataset)))[::-1]), seed=4)
    assert backward == pytest.approx(forward, rel=1e-6)


def test_samples_ignore_chunking(tiny_arch, tiny_grid, tiny_dataset):
    model = build_model("normal", tiny_arch, tiny_grid, seed=5)
    whole = draw_samples(model, tiny_dataset, seed=4)
    single = draw_samples(model, tiny_dataset, seed=4, chunk_size=1)
    assert_allclose(whole, single, atol=1e-3)


def test_grid_mismatch_rejected(tiny_arch, tiny_grid, dataset):
    with pytest.raises(ConfigError):
        evaluate(build_model("normal", tiny_arch, tiny_grid), dataset, seed=0)


def test_empty_test_set_rejected(dataset):
    with pytest.raises(ConfigError):
        evaluate(ReplayModel(), dataset.subset([]), seed=0)


# =============================================================================
# Comparison
# =============================================================================

def make_report(grid, variant, seed, rmse, p0_model=None, p0_truth=None, kl_distance=0.05, angles=()):
    angle_points = [ClutterPoint(r=20.0, theta=float(a), power=-60.0) for a in angles]
    hists = clutter_histograms(angle_points, grid)
    return EvalReport(
        variant=variant,
        rmse_db=rmse,
        p0_model_db=p0_model,
        p0_truth_db=p0_truth,
        kl_distance=kl_distance,
        kl_angle=0.1,
        kl_power=0.2,
        clutter_truth=hists,
        clutter_model=hists,
        seed=seed,
        dataset_hash="abc",
        n_frames=10,
    )


@pytest.fixture
def report_files(tmp_path, grid):
    spread = np.linspace(-0.7, 0.7, 8)
    reports = [
        make_report(grid, "normal", 0, 40.0, -15.0, -10.0, kl_distance=0.3, angles=spread),
        make_report(grid, "normal", 1, 44.0, -14.0, -10.0, kl_distance=0.2, angles=spread),
        make_report(grid, "vae", 0, 24.0, -12.0, -10.0, angles=spread),
        make_report(grid, "vae_mixed", 0, 22.0, -10.5, -10.0, kl_distance=0.02, angles=spread),
        make_report(grid, "vae_mixed", 1, 21.0, -9.5, -10.0, kl_distance=0.04, angles=[0.0]),
    ]
    paths = []
    for index, report in enumerate(reports):
        path = tmp_path / f"report{index}.json"
        path.write_text(report.model_dump_json())
        paths.append(path)
    return paths


def test_summary_takes_medians(report_files):
    summary = summarize(reports_frame(report_files))
    assert summary.loc["normal", "rmse_db"] == 42.0
    assert summary.loc["normal", "runs"] == 2
    assert summary.loc["vae_mixed", "p0_gap_db"] == pytest.approx(0.0)
    assert summary.loc["vae", "p0_gap_db"] == pytest.approx(-2.0)


def test_ordering_checks(report_files):
    checks = ordering_checks(summarize(reports_frame(report_files)))
    assert checks["rmse vae_mixed < normal"]
    assert checks["rmse vae_mixed <= vae"]
    assert checks["kl_distance vae_mixed <= normal"]
    assert checks["|p0 gap| vae_mixed <= 2 dB"]
    assert checks["vae under-predicts p0"]
    assert checks["angle bins normal >= 5"]


def test_missing_variants_skip_checks(report_files):
    checks = ordering_checks(summarize(reports_frame(report_files[:2])))
    assert set(checks) == {"angle bins normal >= 5"}


def test_write_summary_csv(tmp_path, report_files):
    path = tmp_path / "out" / "summary.csv"
    write_summary(summarize(reports_frame(report_files)), path)
    header = path.read_text().splitlines()[0]
    assert header.startswith("variant,rmse_db")


def test_bad_report_files(tmp_path):
    with pytest.raises(DataIOError):
        load_report(tmp_path / "absent.json")
    bogus = tmp_path / "bogus.json"
    bogus.write_text('{"variant": "normal"}')
    with pytest.raises(ConfigError):
        load_report(bogus)
    with pytest.raises(ConfigError):
        reports_frame([])
