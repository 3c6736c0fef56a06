"""
CDE-GAN Toy Benchmark
Main entry point: train on the Gaussian ring, evaluate a checkpoint, dump
sample batches and emit KDE plot data.
"""

import argparse
import json
import logging
import sys
from logging.handlers import RotatingFileHandler
from pathlib import Path
from typing import Any, Dict, List, Optional

from dotenv import load_dotenv

from config import LOGGING_CONFIG, ExperimentConfig, load_config, log_level_from_env, update_config
from src.benchmark.data import RngStream, sample_noise, sample_real, write_batch_csv
from src.benchmark.metrics import CsvMetricsSink, kde_grid, mode_coverage, write_kde_csv
from src.engine.errors import CheckpointError, ConfigError, NumericalError, TrainingHalted
from src.workflows.cde_gan import CDEGANWorkflow, output_lock, sample_checkpoint

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_IO = 4

HANDLER_NAME = "cde_gan"

logger = logging.getLogger("cde_gan")


def setup_logging(logging_config: Dict[str, Any], log_dir: Optional[Path] = None) -> logging.Logger:
    """
    Configure logging based on settings

    Args:
        logging_config (dict): The LOGGING_CONFIG section
        log_dir (Path, optional): Where the rotating log file goes; console only if omitted
    """
    level = logging.getLevelName(logging_config["level"])
    if not isinstance(level, int):
        raise ConfigError(f"Unknown log level: {logging_config['level']}")

    root = logging.getLogger()
    for handler in [h for h in root.handlers if h.get_name() == HANDLER_NAME]:
        root.removeHandler(handler)
        handler.close()
    root.setLevel(level)
    formatter = logging.Formatter(logging_config["format"])

    console = logging.StreamHandler()
    console.set_name(HANDLER_NAME)
    console.setLevel(max(level, logging.WARNING))
    console.setFormatter(formatter)
    root.addHandler(console)

    if log_dir is not None:
        log_dir.mkdir(parents=True, exist_ok=True)
        file_handler = RotatingFileHandler(
            log_dir / logging_config["file"],
            maxBytes=logging_config["max_size"],
            backupCount=logging_config["backup_count"],
        )
        file_handler.set_name(HANDLER_NAME)
        file_handler.setLevel(level)
        file_handler.setFormatter(formatter)
        root.addHandler(file_handler)

    return logger


def _experiment_config(args: argparse.Namespace) -> ExperimentConfig:
    config = load_config(args.config, args.override)
    if args.seed is not None:
        config = config.model_copy(update={"train": config.train.model_copy(update={"seed": args.seed})})
    if args.out_dir is not None:
        config = config.model_copy(update={"output": config.output.model_copy(update={"out_dir": str(args.out_dir)})})
    return config


def _check_count(n: int) -> None:
    if n <= 0:
        raise ConfigError(f"--n must be a positive sample count, got {n}")


def run_train(args: argparse.Namespace) -> int:
    """
    Train a population and write metrics, checkpoints and summary.json

    Args:
        args (Namespace): Parsed command line
    """
    config = _experiment_config(args)
    out_dir = Path(config.output.out_dir)
    setup_logging(LOGGING_CONFIG, out_dir)
    train = config.train

    with output_lock(out_dir):
        (out_dir / "config.json").write_text(json.dumps(config.resolved(), indent=2))
        sink = CsvMetricsSink(
            out_dir / "metrics.csv",
            train.g_parents * train.g_offspring,
            train.d_parents * train.d_offspring,
        )
        workflow = CDEGANWorkflow(config, sinks=[sink], out_dir=out_dir)
        try:
            logger.info(f"Training for {train.iterations} iterations (seed {train.seed}) into {out_dir}")
            population = workflow.run()
        except OSError as e:
            raise OSError(f"{e} (last checkpoint: {workflow.last_checkpoint or 'none'})") from e
        finally:
            sink.close()

        report = workflow.evaluate(population, label="final")
        summary = {
            "covered_modes": report.covered_modes,
            "hq_ratio": report.hq_ratio,
            "per_mode_counts": report.per_mode_counts,
            "iterations": population.iteration,
            "best_generator": population.best_generator_index(),
            "config": config.resolved(),
        }
        (out_dir / "summary.json").write_text(json.dumps(summary, indent=2))

    logger.info(f"Training completed - {report.covered_modes}/{config.ring.n_modes} modes, hq_ratio {report.hq_ratio:.3f}")
    print(f"Covered modes: {report.covered_modes}/{config.ring.n_modes}, hq_ratio: {report.hq_ratio:.3f}")
    print(f"Summary written to {out_dir / 'summary.json'}")
    return EXIT_OK


def run_eval(args: argparse.Namespace) -> int:
    """Print the ModeReport of n samples from a checkpoint's best generator"""
    setup_logging(LOGGING_CONFIG)
    if args.checkpoint is None:
        raise ConfigError("eval needs --checkpoint")
    n = args.n if args.n is not None else 512
    _check_count(n)

    samples, config = sample_checkpoint(args.checkpoint, n, args.seed if args.seed is not None else 0)
    report = mode_coverage(
        samples,
        config.ring,
        threshold_sigmas=config.evaluation.threshold_sigmas,
        min_mode_fraction=config.evaluation.min_mode_fraction,
    )
    print(report.model_dump_json(indent=2))
    return EXIT_OK


def run_sample(args: argparse.Namespace) -> int:
    """Dump one real batch and one noise batch to CSV"""
    config = _experiment_config(args)
    out_dir = Path(config.output.out_dir)
    setup_logging(LOGGING_CONFIG, out_dir)
    n = args.n if args.n is not None else config.train.batch_size
    _check_count(n)

    rng = RngStream(config.train.seed).child("sample")
    real = sample_real(config.ring, n, rng)
    noise = sample_noise(config.noise, n, rng)
    write_batch_csv(real, out_dir / "real.csv", columns=["x", "y"])
    write_batch_csv(noise, out_dir / "noise.csv")
    print(f"Wrote {n} real points and {n} noise vectors to {out_dir}")
    return EXIT_OK


def run_plot_data(args: argparse.Namespace) -> int:
    """Write a KDE grid and the raw samples it was estimated from"""
    setup_logging(LOGGING_CONFIG)
    if args.checkpoint is None:
        raise ConfigError("plot-data needs --checkpoint")

    n = args.n if args.n is not None else 512
    _check_count(n)
    samples, config = sample_checkpoint(args.checkpoint, n, args.seed if args.seed is not None else 0)
    out_dir = Path(args.out_dir) if args.out_dir is not None else Path(args.checkpoint)
    if out_dir.suffix == ".json":
        out_dir = out_dir.parent

    grid = kde_grid(
        samples,
        resolution=config.evaluation.kde_resolution,
        bandwidth=config.evaluation.kde_bandwidth,
        extent=config.ring.radius + 0.5,
    )
    write_kde_csv(grid, out_dir / "kde_grid.csv")
    write_batch_csv(samples, out_dir / "samples.csv", columns=["x", "y"])
    print(f"Wrote {grid.resolution ** 2}-cell KDE grid and {len(samples)} samples to {out_dir}")
    return EXIT_OK


COMMANDS = {
    "train": run_train,
    "eval": run_eval,
    "sample": run_sample,
    "plot-data": run_plot_data,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Cooperative dual-evolution GAN on the 8-Gaussian ring")
    subparsers = parser.add_subparsers(dest="command", required=True)

    for name, help_text in [
        ("train", "Train a generator/discriminator population"),
        ("eval", "Report mode coverage of a checkpoint's best generator"),
        ("sample", "Dump real and noise batches to CSV"),
        ("plot-data", "Write KDE grid and raw samples of a checkpoint"),
    ]:
        command = subparsers.add_parser(name, help=help_text)
        command.add_argument("--config", type=Path, help="TOML config file (or a summary.json from an earlier run)")
        command.add_argument("--seed", type=int, help="Random seed")
        command.add_argument("--out-dir", type=Path, help="Output directory")
        command.add_argument(
            "--override",
            action="append",
            default=[],
            metavar="KEY=VAL",
            help="Config override, e.g. I=4 or train.delta=0.5 (repeatable)",
        )
        command.add_argument("--checkpoint", type=Path, help="Checkpoint directory or manifest.json")
        command.add_argument("--n", type=int, help="Number of samples")

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point"""
    args = build_parser().parse_args(argv)

    try:
        load_dotenv()
        update_config("logging_config", {"level": log_level_from_env()})
        return COMMANDS[args.command](args)

    except ConfigError as e:
        print(f"Error: {e}")
        return EXIT_CONFIG
    except TrainingHalted as e:
        print(f"Error: {e}")
        logger.error("Training halted", exc_info=True)
        return EXIT_NUMERIC
    except NumericalError as e:
        print(f"Error: {e}")
        logger.error("Numeric failure", exc_info=True)
        return EXIT_NUMERIC
    except (CheckpointError, OSError) as e:
        print(f"Error: {e}")
        logger.error("I/O failure", exc_info=True)
        return EXIT_IO
    except Exception as e:
        print(f"Error: {str(e)}")
        logger.error("Fatal error in main", exc_info=True)
        return 1


if __name__ == "__main__":
    sys.exit(main())
