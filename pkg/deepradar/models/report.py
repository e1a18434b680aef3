"""
Models for evaluation results.
"""
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field


class ClutterPoint(BaseModel):
    """An offroad return at a grass cell center."""
    model_config = ConfigDict(frozen=True)

    r: float
    theta: float
    power: float


class PiecewiseUniformHist(BaseModel):
    """
    Normalized histogram treated as a density constant within each bin.

    An empty histogram (no samples) keeps all-zero probabilities.
    """
    model_config = ConfigDict(frozen=True)

    low: float
    high: float
    n_bins: int = Field(..., ge=1)
    counts: List[int]

    @classmethod
    def from_values(cls, values, low: float, high: float, n_bins: int) -> "PiecewiseUniformHist":
        counts, _ = np.histogram(np.asarray(values, dtype=np.float64), bins=n_bins, range=(low, high))
        return cls(low=low, high=high, n_bins=n_bins, counts=[int(c) for c in counts])

    @property
    def total(self) -> int:
        return int(sum(self.counts))

    @property
    def probabilities(self) -> np.ndarray:
        counts = np.asarray(self.counts, dtype=np.float64)
        if self.total == 0:
            return counts
        return counts / counts.sum()

    @property
    def binning(self) -> Tuple[float, float, int]:
        return (self.low, self.high, self.n_bins)

    @property
    def occupied_bins(self) -> int:
        return int(sum(1 for c in self.counts if c > 0))


class ClutterHistograms(BaseModel):
    """Distance, angle and power histograms of one side of a comparison."""
    distance: PiecewiseUniformHist
    angle: PiecewiseUniformHist
    power: PiecewiseUniformHist
    n_points: int


class EvalReport(BaseModel):
    """
    Metric suite of one model on a withheld split.

    RMSE is reported in dB. P0 fields are None when the split holds no CCR.
    """
    variant: str
    rmse_db: float
    rmse_units: str = "dB"
    p0_model_db: Optional[float] = None
    p0_truth_db: Optional[float] = None
    p0_truth_residual_db: Optional[float] = None
    ccr_returns_model: int = 0
    ccr_returns_truth: int = 0
    kl_distance: float
    kl_angle: float
    kl_power: float
    clutter_truth: ClutterHistograms
    clutter_model: ClutterHistograms
    seed: int
    dataset_hash: str
    n_frames: int
    config: Dict[str, Any] = Field(default_factory=dict)

    def summary_lines(self) -> List[str]:
        def fmt(value: Optional[float]) -> str:
            return "absent" if value is None else f"{value:.4f}"

        return [
            f"rmse_db: {self.rmse_db:.4f}",
            f"p0_model_db: {fmt(self.p0_model_db)}",
            f"p0_truth_db: {fmt(self.p0_truth_db)}",
            f"kl_distance: {self.kl_distance:.4f}",
            f"kl_angle: {self.kl_angle:.4f}",
            f"kl_power: {self.kl_power:.4f}",
        ]
