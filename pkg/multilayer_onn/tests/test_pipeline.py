# multilayer_onn/tests/test_pipeline.py
# Purpose: Unit tests for the experiment runner and run directories

"""
Tests for the pipeline runner module.
"""

import json
import os
import tempfile
from unittest.mock import patch

import numpy as np
import pandas as pd
import pytest

from multilayer_onn.config.schema import RunConfig, apply_overrides, parse_config
from multilayer_onn.datasets.mnist import write_idx
from multilayer_onn.errors import ConfigIOError, ConfigurationError, InvalidArgumentError
from multilayer_onn.geometry.mask_io import load_shift_map, read_pgm
from multilayer_onn.network.checkpoint import load_checkpoint
from multilayer_onn.pipeline_runner import INCOMPLETE_MARKER, ExperimentRunner, make_run_dir


def _spiral_config(output_dir: str) -> RunConfig:
    return apply_overrides(RunConfig(), {
        "output_dir": output_dir,
        "threads": 1,
        "seed": 2,
        "network.hidden": [6],
        "network.n_out": 8,
        "spiral.per_class": 30,
        "spiral.epochs": 3,
    })


def _write_mnist(data_dir: str, n_train: int, n_test: int) -> None:
    rng = np.random.default_rng(0)
    for split, count in (("train", n_train), ("t10k", n_test)):
        write_idx(
            os.path.join(data_dir, f"{split}-images-idx3-ubyte"),
            os.path.join(data_dir, f"{split}-labels-idx1-ubyte"),
            rng.integers(0, 256, size=(count, 28, 28)),
            np.arange(count) % 10,
        )


def test_make_run_dir_never_reuses():
    """
    Test that consecutive allocations give distinct, fresh directories.
    """
    with tempfile.TemporaryDirectory() as temp_dir:
        first = make_run_dir(temp_dir, "train")
        second = make_run_dir(temp_dir, "train")
        assert first != second
        assert os.path.basename(first).startswith("train_")
        assert os.path.isdir(first) and os.path.isdir(second)


def test_runner_initialization():
    """
    Test that the ExperimentRunner can be initialized.
    """
    runner = ExperimentRunner(RunConfig(), run_id="abc12345")
    assert runner.run_id == "abc12345"
    assert runner.run_dir is None


def test_unknown_command():
    """
    Test that an unknown command is rejected before any directory is created.
    """
    with tempfile.TemporaryDirectory() as temp_dir:
        runner = ExperimentRunner(_spiral_config(temp_dir))
        with pytest.raises(InvalidArgumentError):
            runner.run("dance")
        assert os.listdir(temp_dir) == []


def test_energy_scan_artifacts():
    """
    Test the energy tables, status report and effective config of a run.
    """
    with tempfile.TemporaryDirectory() as temp_dir:
        cfg = _spiral_config(temp_dir)
        outcome = ExperimentRunner(cfg).run("energy-scan")
        assert outcome.status == "success"
        assert outcome.metrics["ops_per_w_8x8"] == pytest.approx(11.61e9, rel=0.05)

        files = set(os.listdir(outcome.run_dir))
        assert {"status.json", "effective_config.yaml", "metrics.prom", "metrics.csv", "energy"} <= files
        assert INCOMPLETE_MARKER not in files
        for name in ("ops_per_readin.csv", "perf_vs_grid.csv", "perf_vs_clock.csv", "min_optical_power.csv"):
            assert os.path.exists(os.path.join(outcome.run_dir, "energy", name))

        with open(os.path.join(outcome.run_dir, "status.json")) as f:
            status = json.load(f)
        assert status["status"] == "success"
        assert status["command"] == "energy-scan"

        effective = parse_config(os.path.join(outcome.run_dir, "effective_config.yaml"))
        assert effective.command == "energy-scan"
        assert effective.seed == 2


def test_failed_run_keeps_marker():
    """
    Test that a failing command leaves INCOMPLETE and a failure report.
    """
    with tempfile.TemporaryDirectory() as temp_dir:
        runner = ExperimentRunner(_spiral_config(temp_dir))
        with pytest.raises(ConfigurationError):
            runner.run("infer", "spiral")
        files = os.listdir(runner.run_dir)
        assert INCOMPLETE_MARKER in files
        with open(os.path.join(runner.run_dir, "status.json")) as f:
            status = json.load(f)
        assert status["status"] == "failure"
        assert "checkpoint" in status["error"]["message"]


def test_prepare_spiral_data():
    """
    Test the spiral train/test CSV split.
    """
    with tempfile.TemporaryDirectory() as temp_dir:
        outcome = ExperimentRunner(_spiral_config(temp_dir)).run("prepare-data", "spiral")
        train = pd.read_csv(os.path.join(outcome.run_dir, "data", "train.csv"))
        test = pd.read_csv(os.path.join(outcome.run_dir, "data", "test.csv"))
        assert (len(train), len(test)) == (100, 20)
        assert outcome.metrics["input_dim"] == 2


def test_missing_mnist_is_reported():
    """
    Test that absent IDX files fail with the data directory in the report.
    """
    with tempfile.TemporaryDirectory() as temp_dir:
        data_dir = os.path.join(temp_dir, "no_mnist")
        os.makedirs(data_dir)
        cfg = apply_overrides(_spiral_config(temp_dir), {"paths.data_dir": data_dir})
        runner = ExperimentRunner(cfg)
        with pytest.raises(ConfigIOError) as exc:
            runner.run("prepare-data", "mnist")
        assert "MNIST" in str(exc.value)
        assert exc.value.context["path"] == data_dir


def test_mnist_files_are_pooled_and_split():
    """
    Test that the train and t10k files are pooled and re-split 5:1 whatever their own sizes.
    """
    with tempfile.TemporaryDirectory() as temp_dir:
        data_dir = os.path.join(temp_dir, "mnist")
        _write_mnist(data_dir, n_train=66, n_test=6)
        cfg = apply_overrides(_spiral_config(temp_dir), {"paths.data_dir": data_dir})
        outcome = ExperimentRunner(cfg).run("prepare-data", "mnist")
        assert (outcome.metrics["n_train"], outcome.metrics["n_test"]) == (60, 12)
        assert outcome.metrics["n_train"] == 5 * outcome.metrics["n_test"]
        assert outcome.metrics["input_dim"] == 64
        test = pd.read_csv(os.path.join(outcome.run_dir, "data", "test.csv"))
        assert len(test) == 12


@pytest.mark.slow
def test_reproduce_mnist_writes_aligned_masks():
    """
    Test that a misaligned stage is aligned, and the masks are rasterized again at the shifted windows.
    """
    with tempfile.TemporaryDirectory() as temp_dir:
        data_dir = os.path.join(temp_dir, "mnist")
        _write_mnist(data_dir, n_train=50, n_test=10)
        cfg = apply_overrides(_spiral_config(temp_dir), {
            "paths.data_dir": data_dir,
            "network.hidden": [50, 50],
            "network.n_out": 64,
            "network.fidelities": ["algebraic"],
            "train.epochs": 1,
            "train.batch_size": 32,
            "calibration.misalignment": [0.0, 2.0],
            "calibration.align": True,
        })
        outcome = ExperimentRunner(cfg).run("reproduce", "mnist")
        assert "accuracy_hardware_calibrated" in outcome.metrics

        for k in range(3):
            plain, _ = read_pgm(os.path.join(outcome.run_dir, "masks", f"stage_{k}.pgm"))
            aligned, _ = read_pgm(os.path.join(outcome.run_dir, "masks_aligned", f"stage_{k}.pgm"))
            assert plain.shape == aligned.shape
            assert not np.array_equal(plain, aligned)
            shifts = load_shift_map(os.path.join(outcome.run_dir, "masks_aligned", f"stage_{k}.shifts.json"))
            assert np.any(shifts != 0)
            kept = load_shift_map(os.path.join(outcome.run_dir, "calibration", f"stage_{k}.shifts.json"))
            assert np.array_equal(shifts, kept)

        # Compiling again from the calibration directory reuses the stored shifts.
        again = ExperimentRunner(apply_overrides(cfg, {
            "paths.checkpoint": os.path.join(outcome.run_dir, "checkpoint.json"),
            "paths.calibration_dir": os.path.join(outcome.run_dir, "calibration"),
        })).run("compile-mask", "mnist")
        recompiled, _ = read_pgm(os.path.join(again.run_dir, "masks", "stage_0.pgm"))
        aligned, _ = read_pgm(os.path.join(outcome.run_dir, "masks_aligned", "stage_0.pgm"))
        assert np.array_equal(recompiled, aligned)


def test_reproduce_spiral():
    """
    Test the short spiral experiment end to end, and inference from its checkpoint.
    """
    with tempfile.TemporaryDirectory() as temp_dir:
        cfg = _spiral_config(temp_dir)
        outcome = ExperimentRunner(cfg).run("reproduce", "spiral")
        for name in ("checkpoint.json", "loss_curve.csv", "confusion_algebraic.csv", "confusion_noisy.csv"):
            assert os.path.exists(os.path.join(outcome.run_dir, name))
        assert 0.0 <= outcome.metrics["accuracy_algebraic"] <= 1.0
        assert "accuracy_noisy" in outcome.metrics
        assert "linear_baseline_accuracy" in outcome.metrics
        assert outcome.metrics["settle_residual"] < 0.01

        checkpoint = os.path.join(outcome.run_dir, "checkpoint.json")
        net, metadata = load_checkpoint(checkpoint)
        assert metadata["target"] == "spiral"
        assert [layer.n_in for layer in net.layers] == [2, 6]

        again = ExperimentRunner(apply_overrides(cfg, {"paths.checkpoint": checkpoint})).run("infer", "spiral")
        assert again.metrics["accuracy_algebraic"] == outcome.metrics["accuracy_algebraic"]


def test_hardware_commands_need_physical_layout():
    """
    Test that mask compilation refuses a network without a stage layout.
    """
    with tempfile.TemporaryDirectory() as temp_dir:
        cfg = _spiral_config(temp_dir)
        outcome = ExperimentRunner(cfg).run("train", "spiral")
        checkpoint = os.path.join(outcome.run_dir, "checkpoint.json")
        runner = ExperimentRunner(apply_overrides(cfg, {"paths.checkpoint": checkpoint}))
        with pytest.raises(ConfigurationError):
            runner.run("compile-mask", "spiral")


def test_metrics_recorded_on_success():
    """
    Test that a successful run reports to the metrics collector.
    """
    with tempfile.TemporaryDirectory() as temp_dir:
        with patch("multilayer_onn.pipeline_runner.metrics_collector") as mock_collector:
            mock_collector.exposition.return_value = b""
            ExperimentRunner(_spiral_config(temp_dir)).run("energy-scan")
        mock_collector.record_run_start.assert_called_once()
        mock_collector.record_run_success.assert_called_once_with("energy-scan")
        mock_collector.record_run_failure.assert_not_called()
