"""
Comparison of evaluation reports across variants and seeds.

This module loads EvalReport JSON files into a pandas DataFrame,
aggregates medians per variant and checks the expected orderings
between variants.
"""
import logging
from pathlib import Path
from typing import Dict, Iterable, Union

import pandas as pd
from pydantic import ValidationError

from deepradar.errors import ConfigError, DataIOError
from deepradar.models.report import EvalReport

logger = logging.getLogger(__name__)

METRIC_COLUMNS = ["rmse_db", "p0_model_db", "p0_truth_db", "kl_distance", "kl_angle", "kl_power", "angle_bins"]


def load_report(path: Union[str, Path]) -> EvalReport:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise DataIOError(f"cannot read report {path}: {e}") from e
    try:
        return EvalReport.model_validate_json(text)
    except ValidationError as e:
        raise ConfigError(f"{path} is not an evaluation report: {e.errors()[0]['msg']}") from e


def reports_frame(paths: Iterable[Union[str, Path]]) -> pd.DataFrame:
    """One row per report with the headline metrics."""
    rows = []
    for path in paths:
        report = load_report(path)
        rows.append({
            "report": str(path),
            "variant": report.variant,
            "seed": report.seed,
            "rmse_db": report.rmse_db,
            "p0_model_db": report.p0_model_db,
            "p0_truth_db": report.p0_truth_db,
            "kl_distance": report.kl_distance,
            "kl_angle": report.kl_angle,
            "kl_power": report.kl_power,
            "angle_bins": report.clutter_model.angle.occupied_bins,
        })
    if not rows:
        raise ConfigError("no reports to compare")
    return pd.DataFrame(rows)


def summarize(frame: pd.DataFrame) -> pd.DataFrame:
    """Median of each metric per variant, with the number of runs and the P0 gap."""
    summary = frame.groupby("variant")[METRIC_COLUMNS].median()
    summary["p0_gap_db"] = summary["p0_model_db"] - summary["p0_truth_db"]
    summary["runs"] = frame.groupby("variant").size()
    return summary


def ordering_checks(summary: pd.DataFrame) -> Dict[str, bool]:
    """
    Orderings expected between variants; checks needing a missing variant
    are left out.
    """
    checks: Dict[str, bool] = {}
    variants = set(summary.index)

    def metric(variant: str, column: str) -> float:
        return float(summary.loc[variant, column])

    if {"vae_mixed", "normal"} <= variants:
        checks["rmse vae_mixed < normal"] = metric("vae_mixed", "rmse_db") < metric("normal", "rmse_db")
        checks["kl_distance vae_mixed <= normal"] = (
            metric("vae_mixed", "kl_distance") <= metric("normal", "kl_distance")
        )
    if {"vae_mixed", "vae"} <= variants:
        checks["rmse vae_mixed <= vae"] = metric("vae_mixed", "rmse_db") <= metric("vae", "rmse_db")
    if "vae_mixed" in variants:
        gap = summary.loc["vae_mixed", "p0_gap_db"]
        checks["|p0 gap| vae_mixed <= 2 dB"] = bool(pd.notna(gap) and abs(gap) <= 2.0)
        checks["kl_distance vae_mixed <= 0.10"] = metric("vae_mixed", "kl_distance") <= 0.10
    if "vae" in variants:
        gap = summary.loc["vae", "p0_gap_db"]
        checks["vae under-predicts p0"] = bool(pd.notna(gap) and gap < 0.0)
    for variant in variants:
        checks[f"angle bins {variant} >= 5"] = metric(variant, "angle_bins") >= 5
    return checks


def write_summary(summary: pd.DataFrame, path: Union[str, Path]) -> None:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        summary.to_csv(path, float_format="%.6f")
    except OSError as e:
        raise DataIOError(f"cannot write summary {path}: {e}") from e
    logger.info(f"Wrote comparison of {len(summary)} variants to {path}")
