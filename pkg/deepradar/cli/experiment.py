#!/usr/bin/env python
"""
End-to-end variant comparison: generate one dataset, train every variant
under several seeds, evaluate each checkpoint on its held-out frames and
summarize the reports with the expected orderings.

Usage:
    python -m deepradar.cli.experiment --workdir runs/compare
    python -m deepradar.cli.experiment --workdir runs/quick --frames 500 --seeds 0 --epochs 5
"""
import argparse
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional

from deepradar.cli.main import LOG_FORMAT, MODEL_CHOICES
from deepradar.cli.main import main as cli_main
from deepradar.config import settings
from deepradar.errors import ConfigError, DataIOError, DeepRadarError, NumericError
from deepradar.services.evaluation.comparison import ordering_checks, reports_frame, summarize, write_summary
from deepradar.utils.monitoring.errorReporter import capture_exception
from deepradar.utils.monitoring.metrics import track_duration, write_metrics

logger = logging.getLogger(__name__)

DEFAULT_VARIANTS = "normal,vae,vae-mixed"
STEP_ERRORS = {error.exit_code: error for error in (ConfigError, DataIOError, NumericError)}


def _csv_list(text: str) -> List[str]:
    items = [item.strip() for item in text.split(",") if item.strip()]
    if not items:
        raise argparse.ArgumentTypeError("expected a comma-separated list")
    return items


def _seed_list(text: str) -> List[int]:
    try:
        return [int(item) for item in _csv_list(text)]
    except ValueError:
        raise argparse.ArgumentTypeError(f"seeds must be integers, got '{text}'")


def setup_parser() -> argparse.ArgumentParser:
    """Set up command line argument parser."""
    parser = argparse.ArgumentParser(description="Generate, train, evaluate and compare the model variants")
    parser.add_argument("-v", "--verbose", action="store_true", help="Debug logging")
    parser.add_argument("--metrics-file", default=None, help="Write Prometheus metrics to this textfile")
    parser.add_argument("--workdir", required=True, help="Directory for the dataset, checkpoints and reports")
    parser.add_argument("--frames", type=int, default=5000, help="Number of frames (default: 5000)")
    parser.add_argument("--data-seed", type=int, default=0, help="Oracle seed (default: 0)")
    parser.add_argument("--seeds", type=_seed_list, default=[0, 1, 2], help="Training seeds (default: 0,1,2)")
    parser.add_argument("--variants", type=_csv_list, default=_csv_list(DEFAULT_VARIANTS),
                        help=f"Model variants (default: {DEFAULT_VARIANTS})")
    parser.add_argument("--eval-seed", type=int, default=0, help="Sampling seed for evaluation (default: 0)")
    parser.add_argument("--epochs", type=int, help="Epochs per training run (default: the training config's)")
    parser.add_argument("--oracle-config", help="Oracle config file (key = value)")
    parser.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="Oracle config override")
    parser.add_argument("--train-config", help="Training config file (key = value)")
    parser.add_argument("--train-set", action="append", default=[], metavar="KEY=VALUE",
                        help="Training config override")
    parser.add_argument("--resume", action="store_true", help="Skip steps whose output already exists")
    parser.add_argument("--strict", action="store_true", help="Exit 1 when an ordering check fails")
    return parser


def _run_step(argv: List[str], output: Path, resume: bool) -> None:
    if resume and output.exists():
        logger.info(f"Reusing {output}")
        return
    logger.info(f"Running: {' '.join(argv)}")
    code = cli_main(argv)
    if code:
        # re-raise under the class that carries the same exit code
        raise STEP_ERRORS.get(code, DeepRadarError)(f"step '{argv[0]}' failed with exit code {code}")


@track_duration("experiment")
def run_experiment(args: argparse.Namespace) -> bool:
    """
    Run every step of the comparison.

    Returns:
        True when all ordering checks pass
    """
    unknown = sorted(set(args.variants) - set(MODEL_CHOICES))
    if unknown:
        raise ConfigError(f"unknown variants {unknown}; choose from {MODEL_CHOICES}")
    if args.frames < 1:
        raise ConfigError("frames must be ≥ 1")

    workdir = Path(args.workdir)
    data_path = workdir / "frames.drsd"
    gen_argv = ["gen", "--frames", str(args.frames), "--seed", str(args.data_seed), "--out", str(data_path)]
    if args.oracle_config:
        gen_argv += ["--config", args.oracle_config]
    for override in args.set:
        gen_argv += ["--set", override]
    _run_step(gen_argv, data_path, args.resume)

    reports = []
    for variant in args.variants:
        for seed in args.seeds:
            run_name = f"{variant}_seed{seed}"
            checkpoint = workdir / "models" / f"{run_name}.drsm"
            train_argv = ["train", "--model", variant, "--data", str(data_path), "--seed", str(seed),
                          "--out", str(checkpoint)]
            if args.train_config:
                train_argv += ["--config", args.train_config]
            for override in args.train_set:
                train_argv += ["--set", override]
            if args.epochs is not None:
                train_argv += ["--epochs", str(args.epochs)]
            _run_step(train_argv, checkpoint, args.resume)

            report = workdir / "reports" / f"{run_name}.json"
            _run_step(["eval", "--model", str(checkpoint), "--data", str(data_path),
                       "--seed", str(args.eval_seed), "--report", str(report)], report, args.resume)
            reports.append(report)

    summary = summarize(reports_frame(reports))
    write_summary(summary, workdir / "summary.csv")
    checks = ordering_checks(summary)
    try:
        (workdir / "checks.json").write_text(json.dumps(checks, indent=2) + "\n")
    except OSError as e:
        raise DataIOError(f"cannot write checks to {workdir}: {e}") from e

    print(summary.to_string(float_format=lambda v: f"{v:.4f}"))
    for name, passed in checks.items():
        print(f"{'PASS' if passed else 'FAIL'} {name}")
    failed = [name for name, passed in checks.items() if not passed]
    if failed:
        logger.warning(f"{len(failed)} of {len(checks)} ordering checks failed")
    return not failed


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point; returns the process exit code."""
    parser = setup_parser()
    args = parser.parse_args(argv)

    logging.basicConfig(
        level=logging.DEBUG if args.verbose else getattr(logging, settings.LOG_LEVEL.upper(), logging.INFO),
        format=LOG_FORMAT,
        stream=sys.stderr,
    )

    try:
        passed = run_experiment(args)
        return 1 if args.strict and not passed else 0
    except Exception as e:
        return capture_exception(e, {"command": "experiment", "workdir": args.workdir})
    finally:
        write_metrics(args.metrics_file or settings.METRICS_FILE)


if __name__ == "__main__":
    sys.exit(main())
