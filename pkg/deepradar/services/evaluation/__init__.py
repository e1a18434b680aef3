"""
Evaluation metrics, the evaluation protocol and cross-run comparison.
"""
from deepradar.services.evaluation.evaluator import ReplayModel, draw_samples, evaluate, expected_rmse
from deepradar.services.evaluation.metrics import (
    clutter_histograms,
    extract_ccr_returns,
    extract_clutter,
    fit_range_power,
    histogram_kl,
    rmse_db,
)
