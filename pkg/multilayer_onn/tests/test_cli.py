# multilayer_onn/tests/test_cli.py
# Purpose: Unit tests for the command-line interface and its exit codes

"""
Tests for the CLI module.
"""

import glob
import json
import os
import tempfile
from unittest.mock import patch

import pytest

from multilayer_onn import __version__
from multilayer_onn.cli import (
    EXIT_OK,
    EXIT_RUNTIME,
    EXIT_USAGE,
    EXIT_VALIDATION,
    create_parser,
    load_effective_config,
    main,
)
from multilayer_onn.errors import FormatError
from multilayer_onn.pipeline_runner import INCOMPLETE_MARKER


def test_version(capsys):
    """
    Test the --version flag.
    """
    assert main(["--version"]) == EXIT_OK
    assert __version__ in capsys.readouterr().out


def test_usage_errors():
    """
    Test that a missing or unknown command exits with the usage code.
    """
    assert main([]) == EXIT_USAGE
    assert main(["dance"]) == EXIT_USAGE
    assert main(["reproduce", "cifar"]) == EXIT_USAGE
    assert main(["train", "--seed", "abc"]) == EXIT_USAGE


def test_flags_before_and_after_command():
    """
    Test that options are accepted on either side of the subcommand.
    """
    parser = create_parser()
    before = parser.parse_args(["--seed", "4", "energy-scan"])
    after = parser.parse_args(["energy-scan", "--seed", "4"])
    assert before.seed == after.seed == 4
    args = parser.parse_args(["--threads", "2", "reproduce", "spiral"])
    assert args.target == "spiral" and args.threads == 2


def test_flags_override_config():
    """
    Test flag precedence over the YAML file.
    """
    with tempfile.TemporaryDirectory() as temp_dir:
        path = os.path.join(temp_dir, "run.yaml")
        with open(path, "w") as f:
            f.write("seed: 3\nthreads: 2\n")
        args = create_parser().parse_args(["--config", path, "--seed", "9", "energy-scan"])
        cfg = load_effective_config(args)
    assert cfg.seed == 9
    assert cfg.threads == 2


def test_energy_scan_command(capsys):
    """
    Test a successful run through the CLI.
    """
    with tempfile.TemporaryDirectory() as temp_dir:
        code = main(["--output-dir", temp_dir, "--threads", "1", "energy-scan"])
        assert code == EXIT_OK
        runs = glob.glob(os.path.join(temp_dir, "energy-scan_*"))
        assert len(runs) == 1
        assert os.path.exists(os.path.join(runs[0], "energy", "perf_vs_grid.csv"))
        assert not os.path.exists(os.path.join(runs[0], INCOMPLETE_MARKER))
    assert "Run directory:" in capsys.readouterr().out


def test_invalid_config_exit_code():
    """
    Test that configuration problems exit with the validation code.
    """
    with tempfile.TemporaryDirectory() as temp_dir:
        assert main(["--config", os.path.join(temp_dir, "missing.yaml"), "energy-scan"]) == EXIT_VALIDATION

        path = os.path.join(temp_dir, "bad.yaml")
        with open(path, "w") as f:
            f.write("energy:\n  clok_hz: 1.0\n")
        assert main(["--config", path, "energy-scan"]) == EXIT_VALIDATION

        missing = os.path.join(temp_dir, "none.json")
        assert main(["--output-dir", temp_dir, "--checkpoint", missing, "infer"]) == EXIT_VALIDATION


def test_runtime_failure_exit_code():
    """
    Test that a module error exits with the runtime code and leaves the run marked incomplete.
    """
    with tempfile.TemporaryDirectory() as temp_dir:
        code = main(["--output-dir", temp_dir, "--threads", "1", "infer", "--target", "spiral"])
        assert code == EXIT_RUNTIME
        runs = glob.glob(os.path.join(temp_dir, "infer_*"))
        assert len(runs) == 1
        assert os.path.exists(os.path.join(runs[0], INCOMPLETE_MARKER))
        with open(os.path.join(runs[0], "status.json")) as f:
            assert json.load(f)["error"]["module"] == "network"


@pytest.mark.parametrize("error", [FormatError("broken checkpoint", module="network"), RuntimeError("boom")])
def test_unexpected_errors_exit_with_runtime_code(error):
    """
    Test that errors raised inside a run map to the runtime code.
    """
    with tempfile.TemporaryDirectory() as temp_dir:
        with patch("multilayer_onn.cli.ExperimentRunner.run", side_effect=error):
            assert main(["--output-dir", temp_dir, "energy-scan"]) == EXIT_RUNTIME
