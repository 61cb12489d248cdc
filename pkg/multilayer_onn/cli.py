#!/usr/bin/env python3
"""
multilayer_onn/cli.py
Purpose: Command-line interface for the multilayer optical network simulator

This module provides the single entry point for dataset preparation, training, mask
compilation, calibration, inference and energy sweeps.
"""

import argparse
import json
import sys
from typing import Any, Dict, List, Optional

from multilayer_onn import __version__
from multilayer_onn.config.schema import COMMANDS, TARGETS, RunConfig, apply_overrides, parse_config
from multilayer_onn.config.settings import Settings
from multilayer_onn.errors import ConfigIOError, ConfigValidationError, OnnError
from multilayer_onn.pipeline_runner import ExperimentRunner
from multilayer_onn.utils.logger import get_logger, setup_json_logger

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_VALIDATION = 2
EXIT_RUNTIME = 3


class _UsageParser(argparse.ArgumentParser):
    """ArgumentParser that reports usage errors with exit code 1 instead of 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _add_common_options(parser: argparse.ArgumentParser) -> None:
    # SUPPRESS keeps a subcommand from resetting options given before it
    opts = {"default": argparse.SUPPRESS}
    parser.add_argument("-v", "--verbose", action="store_true", help="Enable debug logging", **opts)
    parser.add_argument("--config", help="Path to a YAML run configuration", **opts)
    parser.add_argument("--seed", type=int, help="Global seed (overrides the config)", **opts)
    parser.add_argument("--threads", type=int, help="Worker threads (default: machine parallelism)", **opts)
    parser.add_argument("--output-dir", help="Parent directory of run directories", **opts)
    parser.add_argument("--data-dir", help="Directory holding the MNIST IDX files", **opts)
    parser.add_argument("--checkpoint", help="Trained network checkpoint (compile-mask, calibrate, infer)", **opts)
    parser.add_argument("--calibration-dir", help="Directory of stage_<k>.json calibration maps (infer)", **opts)


def create_parser():
    """Create and configure the argument parser."""
    parser = _UsageParser(
        prog="multilayer-onn",
        description="Multilayer ONN - digital twin of a multilayer incoherent optoelectronic neural network",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  multilayer-onn --version
  multilayer-onn energy-scan
  multilayer-onn --config configs/example.yaml train
  multilayer-onn --data-dir data/mnist reproduce mnist
  multilayer-onn reproduce spiral --seed 3
        """
    )

    parser.add_argument(
        "--version",
        action="version",
        version=f"%(prog)s {__version__}"
    )

    _add_common_options(parser)

    subparsers = parser.add_subparsers(dest="command", help="Available commands", parser_class=_UsageParser)
    helps = {
        "prepare-data": "Preprocess a dataset and write train/test CSV",
        "train": "Train the hardware-constrained network",
        "compile-mask": "Compile a trained checkpoint into amplitude masks",
        "calibrate": "Calibrate the simulated hardware (and pre-compensate a checkpoint)",
        "infer": "Evaluate a checkpoint at every fidelity level",
        "energy-scan": "Write energy and scaling tables",
        "reproduce": "Run a full experiment end to end",
    }
    for command in COMMANDS:
        sub = subparsers.add_parser(command, help=helps[command])
        _add_common_options(sub)
        if command == "reproduce":
            sub.add_argument("target", choices=TARGETS, help="Experiment to reproduce")
        elif command != "energy-scan":
            sub.add_argument("--target", choices=TARGETS, help="Dataset (default from config: mnist)")

    return parser


def load_effective_config(args) -> RunConfig:
    """
    Resolve the run config with precedence flags > YAML > environment > defaults.

    Args:
        args: Parsed CLI arguments.

    Returns:
        RunConfig: Validated configuration.
    """
    config_path = getattr(args, "config", None)
    cfg = parse_config(config_path) if config_path else RunConfig()
    flags = {
        "seed": "seed",
        "threads": "threads",
        "output_dir": "output_dir",
        "data_dir": "paths.data_dir",
        "checkpoint": "paths.checkpoint",
        "calibration_dir": "paths.calibration_dir",
        "target": "target",
    }
    overrides: Dict[str, Any] = {key: getattr(args, dest, None) for dest, key in flags.items()}
    return apply_overrides(cfg, overrides)


def cmd_run(args) -> int:
    """Handle every simulator command."""
    logger = get_logger(__name__)
    try:
        cfg = load_effective_config(args)
    except (ConfigValidationError, ConfigIOError) as e:
        logger.error(f"Invalid configuration: {e}")
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_VALIDATION

    runner = ExperimentRunner(cfg)
    try:
        outcome = runner.run(args.command, getattr(args, "target", None))
    except (ConfigValidationError, ConfigIOError) as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    except OnnError as e:
        print(f"Error [{e.module}]: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as e:
        logger.exception("Unexpected failure")
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_RUNTIME

    print(f"Run directory: {outcome.run_dir}")
    print(json.dumps(outcome.metrics, indent=2, default=str))
    return EXIT_OK


def main(argv: Optional[List[str]] = None) -> int:
    """Main CLI entry point."""
    parser = create_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)

    settings = Settings()
    level = "DEBUG" if getattr(args, "verbose", False) else settings.log_level
    setup_json_logger("multilayer_onn", level, settings.json_logs)

    if args.command is None:
        parser.print_help()
        return EXIT_USAGE
    return cmd_run(args)


if __name__ == "__main__":
    sys.exit(main())
