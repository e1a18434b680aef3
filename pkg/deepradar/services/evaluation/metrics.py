"""
Sensor-model validation metrics: expected RMSE, radar range equation fit,
CCR return extraction, clutter extraction and histogram KL divergence.
"""
import logging
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from deepradar.errors import ConfigError, ShapeError
from deepradar.models.report import ClutterHistograms, ClutterPoint, PiecewiseUniformHist
from deepradar.models.scene import ObjectClass, PolarGridSpec, SceneObject
from deepradar.scene.grid import RadarFrame, SceneRaster

logger = logging.getLogger(__name__)

KL_SMOOTHING = 1e-6
HISTOGRAM_BINS = 32
# Cells count as clutter returns above floor_db + this margin
CLUTTER_MARGIN_DB = 10.0
CCR_WINDOW = 1


def rmse_db(truth: np.ndarray, predicted: np.ndarray) -> float:
    """Root of the mean squared deviation pooled over every cell of every frame."""
    truth = np.asarray(truth, dtype=np.float64)
    predicted = np.asarray(predicted, dtype=np.float64)
    if truth.shape != predicted.shape:
        raise ShapeError(f"truth {truth.shape} and prediction {predicted.shape} differ")
    if truth.size == 0:
        raise ConfigError("RMSE of an empty test set is undefined")
    return float(np.sqrt(np.mean((truth - predicted) ** 2)))


def fit_range_power(points: Sequence[Tuple[float, float]]) -> float:
    """
    Least-squares fit of P_db(r) = P0_db - 40 log10 r in dB.

    Args:
        points: (range m, power dB) pairs, ranges positive

    Returns:
        P0_db = mean(p_i + 40 log10 r_i)
    """
    array = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    if len(array) == 0:
        raise ConfigError("cannot fit the range equation to zero points")
    if np.any(array[:, 0] <= 0):
        raise ConfigError("ranges must be positive")
    return float(np.mean(array[:, 1] + 40.0 * np.log10(array[:, 0])))


def range_fit_residual(points: Sequence[Tuple[float, float]], p0_db: float) -> float:
    """RMS residual (dB) of points around P0_db - 40 log10 r."""
    array = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    residual = array[:, 1] - (p0_db - 40.0 * np.log10(array[:, 0]))
    return float(np.sqrt(np.mean(residual ** 2)))


def extract_ccr_returns(power: np.ndarray, objects: Sequence[SceneObject], spec: PolarGridSpec,
                        window: int = CCR_WINDOW) -> List[Tuple[float, float]]:
    """
    Strongest cell in a (2w+1)^2 window around each CCR's true cell.

    Args:
        power: One frame's dB grid (n_range x n_azimuth x 1 or n_range x n_azimuth)
        objects: The frame's objects
        spec: Grid of the frame

    Returns:
        (true range, window max power) per in-grid CCR
    """
    grid = np.asarray(power).reshape(spec.shape)
    returns = []
    for obj in objects:
        if obj.object_class is not ObjectClass.CCR:
            continue
        i, j, inside = spec.cell_index(obj.range, obj.azimuth)
        if not inside:
            continue
        i, j = int(i), int(j)
        patch = grid[max(i - window, 0):i + window + 1, max(j - window, 0):j + window + 1]
        returns.append((obj.range, float(patch.max())))
    return returns


def extract_clutter(frame: RadarFrame, raster: SceneRaster, threshold_db: Optional[float] = None) -> List[ClutterPoint]:
    """One ClutterPoint per grass cell whose power exceeds the threshold (default floor + 10 dB)."""
    if frame.spec != raster.spec:
        raise ConfigError("frame and raster use different grids")
    spec = frame.spec
    threshold = spec.floor_db + CLUTTER_MARGIN_DB if threshold_db is None else threshold_db
    power = frame.power[..., 0]
    hits = np.argwhere(raster.grass & (power > threshold))
    r_centers = spec.range_centers()
    az_centers = spec.azimuth_centers()
    return [ClutterPoint(r=float(r_centers[i]), theta=float(az_centers[j]), power=float(power[i, j]))
            for i, j in hits]


def clutter_histograms(points: Iterable[ClutterPoint], spec: PolarGridSpec,
                       n_bins: int = HISTOGRAM_BINS) -> ClutterHistograms:
    """Distance over [0, range_max], angle over the field of view, power over the dB range."""
    points = list(points)
    r = [p.r for p in points]
    theta = [p.theta for p in points]
    power = [p.power for p in points]
    return ClutterHistograms(
        distance=PiecewiseUniformHist.from_values(r, 0.0, spec.range_max, n_bins),
        angle=PiecewiseUniformHist.from_values(theta, spec.az_min, spec.az_max, n_bins),
        power=PiecewiseUniformHist.from_values(power, spec.floor_db, spec.ceil_db, n_bins),
        n_points=len(points),
    )


def smoothed_probabilities(hist: PiecewiseUniformHist, epsilon: float = KL_SMOOTHING) -> np.ndarray:
    p = hist.probabilities + epsilon
    return p / p.sum()


def histogram_kl(real: PiecewiseUniformHist, model: PiecewiseUniformHist, epsilon: float = KL_SMOOTHING) -> float:
    """
    KL(real || model) in nats after adding ``epsilon`` to every bin and
    renormalizing both histograms.
    """
    if real.binning != model.binning:
        raise ConfigError(f"histogram binnings differ: {real.binning} vs {model.binning}")
    return float(stats.entropy(smoothed_probabilities(real, epsilon), smoothed_probabilities(model, epsilon)))
