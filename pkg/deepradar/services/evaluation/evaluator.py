"""
Evaluation protocol: one deploy-mode sample per test frame, then RMSE,
range-equation fits to CCR returns and clutter histogram divergences.
"""
import logging
from typing import Any, Dict, List, Optional, Protocol, Sequence

import numpy as np

from deepradar.errors import ConfigError
from deepradar.models.report import EvalReport
from deepradar.scene.dataset import Dataset, DatasetBatch
from deepradar.scene.grid import RadarFrame
from deepradar.services.evaluation.metrics import (
    clutter_histograms,
    extract_ccr_returns,
    extract_clutter,
    fit_range_power,
    histogram_kl,
    range_fit_residual,
    rmse_db,
)
from deepradar.services.nets.radar_model import RadarModel
from deepradar.utils.monitoring.metrics import FRAMES_EVALUATED
from deepradar.utils.random_streams import EVAL_FRAME, stream

logger = logging.getLogger(__name__)

EVAL_CHUNK = 16


class FrameSampler(Protocol):
    def sample_db(self, batch: DatasetBatch, rngs: Sequence[np.random.Generator]) -> np.ndarray:
        ...


class ReplayModel:
    """Stub 'model' that returns each frame's ground truth."""

    variant_name = "replay"

    def sample_db(self, batch: DatasetBatch, rngs: Sequence[np.random.Generator]) -> np.ndarray:
        return batch.power.copy()


def sampler_name(sampler: FrameSampler) -> str:
    if isinstance(sampler, RadarModel):
        return sampler.variant.value
    return getattr(sampler, "variant_name", type(sampler).__name__)


def draw_samples(sampler: FrameSampler, dataset: Dataset, seed: int, chunk_size: int = EVAL_CHUNK) -> np.ndarray:
    """
    One sample per frame in dB. Frame noise comes from a stream keyed by the
    frame's original index, so results ignore frame order and chunking.
    """
    if isinstance(sampler, RadarModel) and sampler.grid != dataset.spec:
        raise ConfigError("checkpoint grid does not match the dataset grid")
    samples = np.empty_like(dataset.power)
    name = sampler_name(sampler)
    for start in range(0, len(dataset), chunk_size):
        positions = np.arange(start, min(start + chunk_size, len(dataset)))
        batch = dataset.batch(positions)
        rngs = [stream(seed, EVAL_FRAME, int(index)) for index in batch.indices]
        samples[positions] = sampler.sample_db(batch, rngs)
        FRAMES_EVALUATED.labels(variant=name).inc(len(positions))
    return samples


def expected_rmse(sampler: FrameSampler, dataset: Dataset, seed: int) -> float:
    """RMSE in dB between the test frames and one sample per test input."""
    if len(dataset) == 0:
        raise ConfigError("cannot evaluate an empty test set")
    return rmse_db(dataset.power, draw_samples(sampler, dataset, seed))


def _ccr_returns(power: np.ndarray, dataset: Dataset) -> List:
    returns = []
    for pos in range(len(dataset)):
        returns.extend(extract_ccr_returns(power[pos], dataset.scene_objects(pos), dataset.spec))
    return returns


def _clutter(power: np.ndarray, dataset: Dataset) -> List:
    points = []
    for pos in range(len(dataset)):
        frame = RadarFrame(spec=dataset.spec, power=power[pos])
        points.extend(extract_clutter(frame, dataset.raster(pos)))
    return points


def evaluate(sampler: FrameSampler, dataset: Dataset, seed: int, config: Optional[Dict[str, Any]] = None) -> EvalReport:
    """
    Run the full metric suite on a withheld split.

    Args:
        sampler: Trained model or replay stub
        dataset: Test frames
        seed: Sampling seed
        config: Resolved run configuration echoed into the report

    Returns:
        EvalReport; P0 fields are None when no CCR falls in the grid
    """
    if len(dataset) == 0:
        raise ConfigError("cannot evaluate an empty test set")
    name = sampler_name(sampler)
    spec = dataset.spec
    logger.info(f"Evaluating {name} on {len(dataset)} frames (seed {seed})")

    samples = draw_samples(sampler, dataset, seed)
    rmse = rmse_db(dataset.power, samples)

    truth_returns = _ccr_returns(dataset.power, dataset)
    model_returns = _ccr_returns(samples, dataset)
    p0_truth = fit_range_power(truth_returns) if truth_returns else None
    p0_model = fit_range_power(model_returns) if model_returns else None
    residual = range_fit_residual(truth_returns, p0_truth) if truth_returns else None
    if p0_truth is None:
        logger.warning("Test split holds no CCR returns; P0 fields are absent")

    truth_hist = clutter_histograms(_clutter(dataset.power, dataset), spec)
    model_hist = clutter_histograms(_clutter(samples, dataset), spec)

    report = EvalReport(
        variant=name,
        rmse_db=rmse,
        p0_model_db=p0_model,
        p0_truth_db=p0_truth,
        p0_truth_residual_db=residual,
        ccr_returns_model=len(model_returns),
        ccr_returns_truth=len(truth_returns),
        kl_distance=histogram_kl(truth_hist.distance, model_hist.distance),
        kl_angle=histogram_kl(truth_hist.angle, model_hist.angle),
        kl_power=histogram_kl(truth_hist.power, model_hist.power),
        clutter_truth=truth_hist,
        clutter_model=model_hist,
        seed=seed,
        dataset_hash=dataset.fingerprint(),
        n_frames=len(dataset),
        config=config or {},
    )
    for line in report.summary_lines():
        logger.info(line)
    return report
