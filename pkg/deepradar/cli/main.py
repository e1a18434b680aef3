#!/usr/bin/env python
"""
Command-line tool for the deep radar sensor-model toolkit.

Subcommands: gen, train, eval, sample, render, compare. Exit codes: 0
success, 2 usage/config error, 3 I/O error, 4 numeric failure.
"""
import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np

from deepradar import __version__
from deepradar.config import build_config, canonical_json, load_key_value_file, parse_overrides, settings
from deepradar.errors import ConfigError, DataIOError
from deepradar.models.architecture import ModelVariant
from deepradar.models.oracle import OracleConfig
from deepradar.models.training import TrainConfig
from deepradar.scene.dataset import Dataset, read_dataset, write_dataset
from deepradar.scene.grid import RadarFrame
from deepradar.scene.heatmap import write_pgm
from deepradar.services.evaluation.comparison import ordering_checks, reports_frame, summarize, write_summary
from deepradar.services.evaluation.evaluator import ReplayModel, evaluate
from deepradar.services.nets.radar_model import load_model
from deepradar.services.oracle import generate_dataset
from deepradar.services.training.split import split_dataset
from deepradar.services.training.trainer import train
from deepradar.utils.monitoring.errorReporter import capture_exception
from deepradar.utils.monitoring.metrics import track_duration, write_metrics
from deepradar.utils.random_streams import SAMPLE, stream

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
MODEL_CHOICES = ["normal", "gmm", "vae", "vae-adv", "vae-mixed"]


class CliArgumentParser(argparse.ArgumentParser):
    """argparse parser whose usage errors carry the config exit code."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(ConfigError.exit_code, f"{self.prog}: error: {message}\n")


def setup_parser() -> argparse.ArgumentParser:
    """Set up command line argument parser."""
    parser = CliArgumentParser(prog="deepradar", description="Deep stochastic radar sensor-model toolkit")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="Debug logging")
    parser.add_argument("--metrics-file", default=None, help="Write Prometheus metrics to this textfile")
    subparsers = parser.add_subparsers(dest="command", help="Command to execute", parser_class=CliArgumentParser)

    # Generate a synthetic dataset
    gen_parser = subparsers.add_parser("gen", help="Generate a synthetic dataset with the radar oracle")
    gen_parser.add_argument("--config", help="Oracle config file (key = value)")
    gen_parser.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="Config override")
    gen_parser.add_argument("--frames", type=int, required=True, help="Number of frames")
    gen_parser.add_argument("--seed", type=int, help="Seed (default: DRS_SEED, then the config's seed)")
    gen_parser.add_argument("--workers", type=int, help="Generator threads (default: DRS_WORKERS)")
    gen_parser.add_argument("--out", required=True, help="Dataset output path")

    # Train a model
    train_parser = subparsers.add_parser("train", help="Train a radar model")
    train_parser.add_argument("--model", required=True, choices=MODEL_CHOICES, help="Model variant")
    train_parser.add_argument("--data", required=True, help="Dataset path")
    train_parser.add_argument("--config", help="Training config file (key = value)")
    train_parser.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="Config override")
    train_parser.add_argument("--epochs", type=int, help="Number of epochs")
    train_parser.add_argument("--alpha", type=float, help="L_vae weight (vae-mixed only)")
    train_parser.add_argument("--batch-size", type=int, help="Mini-batch size")
    train_parser.add_argument("--split-fraction", type=float, help="Share of frames used for training")
    train_parser.add_argument("--checkpoint-every", type=int, help="Intermediate checkpoint period in epochs")
    train_parser.add_argument("--seed", type=int, help="Seed (default: DRS_SEED, then 0)")
    train_parser.add_argument("--out", required=True, help="Checkpoint output path")
    train_parser.add_argument("--log", help="Training log path (default: checkpoint path with .jsonl)")

    # Evaluate a model
    eval_parser = subparsers.add_parser("eval", help="Evaluate a checkpoint on its withheld split")
    eval_parser.add_argument("--model", required=True, help="Checkpoint path, or 'replay' for the truth-replay stub")
    eval_parser.add_argument("--data", required=True, help="Dataset path")
    eval_parser.add_argument("--seed", type=int, help="Sampling seed (default: DRS_SEED, then 0)")
    eval_parser.add_argument("--report", required=True, help="Report output path (JSON)")

    # Sample heatmaps
    sample_parser = subparsers.add_parser("sample", help="Write sampled and true heatmaps for one frame")
    sample_parser.add_argument("--model", required=True, help="Checkpoint path")
    sample_parser.add_argument("--data", required=True, help="Dataset path")
    sample_parser.add_argument("--frame", type=int, required=True, help="Frame index")
    sample_parser.add_argument("--n", type=int, default=1, help="Number of samples")
    sample_parser.add_argument("--seed", type=int, help="Sampling seed (default: DRS_SEED, then 0)")
    sample_parser.add_argument("--out", required=True, help="Output directory")

    # Render ground truth
    render_parser = subparsers.add_parser("render", help="Write the true heatmap of one frame")
    render_parser.add_argument("--data", required=True, help="Dataset path")
    render_parser.add_argument("--frame", type=int, required=True, help="Frame index")
    render_parser.add_argument("--out", required=True, help="PGM output path")

    # Compare reports
    compare_parser = subparsers.add_parser("compare", help="Aggregate evaluation reports per variant")
    compare_parser.add_argument("reports", nargs="+", help="EvalReport JSON files")
    compare_parser.add_argument("--out", help="CSV output path")

    return parser


def echo_config(command: str, payload: Dict[str, Any]) -> None:
    print(f"config {command}: {canonical_json(payload)}")


def _config_layers(config_path: Optional[str], overrides: List[str]) -> List[Dict[str, Any]]:
    layers = []
    if config_path:
        layers.append(load_key_value_file(config_path))
    layers.append(parse_overrides(overrides))
    return layers


def _frame_position(dataset: Dataset, frame: int) -> int:
    if not 0 <= frame < len(dataset):
        raise ConfigError(f"frame index {frame} out of range [0, {len(dataset)})")
    return frame


@track_duration("gen")
def cmd_gen(args: argparse.Namespace) -> None:
    if args.frames < 1:
        raise ConfigError("frames must be ≥ 1")
    config = build_config(OracleConfig, *_config_layers(args.config, args.set))
    seed = settings.resolve_seed(args.seed, fallback=config.seed)
    config = config.model_copy(update={"seed": seed})
    echo_config("gen", {"frames": args.frames, "oracle": config.model_dump(mode="json")})
    dataset = generate_dataset(args.frames, config, seed=seed, workers=args.workers)
    write_dataset(args.out, dataset)


@track_duration("train")
def cmd_train(args: argparse.Namespace) -> None:
    dataset = read_dataset(args.data)
    seed = settings.resolve_seed(args.seed)
    defaults = {
        "architecture.n_range": dataset.spec.n_range,
        "architecture.n_azimuth": dataset.spec.n_azimuth,
    }
    flags = {
        "variant": ModelVariant.from_cli(args.model).value,
        "epochs": args.epochs,
        "alpha": args.alpha,
        "batch_size": args.batch_size,
        "split_fraction": args.split_fraction,
        "checkpoint_every": args.checkpoint_every,
        "seed": seed,
    }
    config = build_config(TrainConfig, defaults, *_config_layers(args.config, args.set), flags)
    echo_config("train", config.model_dump(mode="json"))

    train_set, test_set = split_dataset(dataset, config.split_fraction, config.seed)
    result = train(train_set, config, checkpoint_path=args.out, dataset_hash=dataset.fingerprint())

    log_path = Path(args.log) if args.log else Path(args.out).with_suffix(".jsonl")
    try:
        log_path.parent.mkdir(parents=True, exist_ok=True)
        log_path.write_text(result.log.to_jsonl(), encoding="utf-8")
    except OSError as e:
        raise DataIOError(f"cannot write training log {log_path}: {e}") from e
    logger.info(f"Wrote training log {log_path} ({len(result.log.records)} epochs, {len(test_set)} frames withheld)")
    history = result.log.to_frame()
    best = history.loc[history["loss"].idxmin()]
    logger.info(f"Loss {history['loss'].iloc[0]:.4f} -> {history['loss'].iloc[-1]:.4f}, "
                f"best {best['loss']:.4f} at epoch {int(best['epoch'])}")


@track_duration("eval")
def cmd_eval(args: argparse.Namespace) -> None:
    dataset = read_dataset(args.data)
    seed = settings.resolve_seed(args.seed)
    if args.model == "replay":
        sampler, test_set = ReplayModel(), dataset
        config: Dict[str, Any] = {"model": "replay"}
    else:
        sampler, header = load_model(args.model)
        if header.grid != dataset.spec:
            raise ConfigError("checkpoint grid does not match the dataset grid")
        meta = header.metadata
        if meta.dataset_hash and meta.dataset_hash != dataset.fingerprint():
            logger.warning("Dataset differs from the one the checkpoint was trained on")
        _, test_set = split_dataset(dataset, meta.split_fraction, meta.seed)
        config = {"model": args.model, "checkpoint": header.model_dump(mode="json")}
    config.update({"data": args.data, "seed": seed})
    echo_config("eval", config)

    report = evaluate(sampler, test_set, seed, config=config)
    try:
        Path(args.report).parent.mkdir(parents=True, exist_ok=True)
        Path(args.report).write_text(report.model_dump_json(indent=2) + "\n", encoding="utf-8")
    except OSError as e:
        raise DataIOError(f"cannot write report {args.report}: {e}") from e
    for line in report.summary_lines():
        print(line)


@track_duration("sample")
def cmd_sample(args: argparse.Namespace) -> None:
    if args.n < 1:
        raise ConfigError("--n must be ≥ 1")
    model, _ = load_model(args.model)
    dataset = read_dataset(args.data)
    if model.grid != dataset.spec:
        raise ConfigError("checkpoint grid does not match the dataset grid")
    position = _frame_position(dataset, args.frame)
    seed = settings.resolve_seed(args.seed)
    echo_config("sample", {"model": args.model, "data": args.data, "frame": args.frame, "n": args.n, "seed": seed})

    out_dir = Path(args.out)
    batch = dataset.batch([position] * args.n)
    index = int(dataset.frame_indices[position])
    rngs = [stream(seed, SAMPLE, index, k) for k in range(args.n)]
    samples = model.sample_db(batch, rngs)
    write_pgm(out_dir / f"frame{args.frame:05d}_truth.pgm", dataset.frame(position))
    for k in range(args.n):
        write_pgm(out_dir / f"frame{args.frame:05d}_sample{k}.pgm", RadarFrame(spec=dataset.spec, power=samples[k]))
    logger.info(f"Wrote {args.n + 1} heatmaps to {out_dir}")


@track_duration("render")
def cmd_render(args: argparse.Namespace) -> None:
    dataset = read_dataset(args.data)
    position = _frame_position(dataset, args.frame)
    echo_config("render", {"data": args.data, "frame": args.frame})
    write_pgm(args.out, dataset.frame(position))


@track_duration("compare")
def cmd_compare(args: argparse.Namespace) -> None:
    summary = summarize(reports_frame(args.reports))
    print(summary.to_string(float_format=lambda v: f"{v:.4f}"))
    for name, passed in ordering_checks(summary).items():
        print(f"{'PASS' if passed else 'FAIL'} {name}")
    if args.out:
        write_summary(summary, args.out)


COMMANDS = {
    "gen": cmd_gen,
    "train": cmd_train,
    "eval": cmd_eval,
    "sample": cmd_sample,
    "render": cmd_render,
    "compare": cmd_compare,
}


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point for the CLI tool; returns the process exit code."""
    parser = setup_parser()
    args = parser.parse_args(argv)

    logging.basicConfig(
        level=logging.DEBUG if args.verbose else getattr(logging, settings.LOG_LEVEL.upper(), logging.INFO),
        format=LOG_FORMAT,
        stream=sys.stderr,
    )
    np.seterr(over="ignore", under="ignore")

    if not args.command:
        parser.print_help()
        return ConfigError.exit_code

    try:
        COMMANDS[args.command](args)
        return 0
    except Exception as e:
        return capture_exception(e, {"command": args.command, "argv": json.dumps(argv or sys.argv[1:])})
    finally:
        write_metrics(args.metrics_file or settings.METRICS_FILE)


if __name__ == "__main__":
    sys.exit(main())
