# multilayer_onn/tests/test_config.py
# Purpose: Unit tests for environment settings and the YAML run configuration

"""
Tests for the config package.
"""

import os
import tempfile
from unittest.mock import patch

import pytest

from multilayer_onn.config.schema import RunConfig, apply_overrides, dump_config, parse_config
from multilayer_onn.config.settings import Settings
from multilayer_onn.errors import ConfigIOError, ConfigValidationError


def _write(temp_dir: str, text: str, name: str = "run.yaml") -> str:
    path = os.path.join(temp_dir, name)
    with open(path, "w", encoding="utf-8") as f:
        f.write(text)
    return path


def test_settings_from_environment():
    """
    Test that ONN_* variables feed the settings and the config defaults.
    """
    env = {"ONN_SEED": "7", "ONN_THREADS": "3", "ONN_OUTPUT_DIR": "elsewhere", "ONN_JSON_LOGS": "false"}
    with patch.dict(os.environ, env):
        settings = Settings()
        assert settings.seed == 7
        assert settings.threads == 3
        assert not settings.json_logs
        cfg = RunConfig()
        assert (cfg.seed, cfg.threads, cfg.output_dir) == (7, 3, "elsewhere")


def test_mnist_paths():
    """
    Test IDX file discovery in the data directory.
    """
    with tempfile.TemporaryDirectory() as temp_dir:
        settings = Settings()
        settings.data_dir = temp_dir
        assert settings.mnist_paths("train") is None
        for name in ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"):
            _write(temp_dir, "", name)
        images, labels = settings.mnist_paths("train")
        assert images.endswith("train-images-idx3-ubyte")
        assert labels.endswith("train-labels-idx1-ubyte")


def test_empty_config_gives_defaults():
    """
    Test that an empty file and a minimal file validate with every default filled in.
    """
    with tempfile.TemporaryDirectory() as temp_dir:
        empty = parse_config(_write(temp_dir, ""))
        assert empty.network.hidden == [50, 50]
        assert empty.calibration.max_shift == 3

        minimal = parse_config(_write(temp_dir, "seed: 5\ntarget: spiral\n", "minimal.yaml"))
        assert minimal.seed == 5
        assert minimal.target == "spiral"


def test_example_config_is_valid():
    """
    Test the shipped example configuration.
    """
    path = os.path.join(os.path.dirname(__file__), "..", "..", "configs", "example.yaml")
    cfg = parse_config(path)
    assert cfg.geometry.d2 == 20000.0
    assert cfg.network.fidelities == ["algebraic", "noisy"]


def test_unknown_key_is_rejected():
    """
    Test that a misspelled key names itself in the error.
    """
    with tempfile.TemporaryDirectory() as temp_dir:
        path = _write(temp_dir, "calibration:\n  gian_sigma: 0.1\n")
        with pytest.raises(ConfigValidationError) as exc:
            parse_config(path)
    assert exc.value.key == "calibration.gian_sigma"


def test_invalid_values_are_rejected():
    """
    Test range, cross-field and path checks.
    """
    with tempfile.TemporaryDirectory() as temp_dir:
        with pytest.raises(ConfigValidationError) as exc:
            parse_config(_write(temp_dir, "geometry:\n  d1: -5\n"))
        assert exc.value.key == "geometry.d1"

        with pytest.raises(ConfigValidationError):
            parse_config(_write(temp_dir, "network:\n  w_min: 1.0\n  w_max: 0.5\n"))

        missing = os.path.join(temp_dir, "nope.json")
        with pytest.raises(ConfigValidationError) as exc:
            parse_config(_write(temp_dir, f"paths:\n  checkpoint: {missing}\n"))
        assert exc.value.key == "paths.checkpoint"


def test_data_dir_checked_for_mnist_data_commands():
    """
    Test that a missing MNIST directory is rejected once a command reads it, and only then.
    """
    with tempfile.TemporaryDirectory() as temp_dir:
        cfg = apply_overrides(RunConfig(), {"paths.data_dir": os.path.join(temp_dir, "absent")})
        for command in ("prepare-data", "train", "infer", "reproduce"):
            with pytest.raises(ConfigValidationError) as exc:
                apply_overrides(cfg, {"command": command})
            assert exc.value.key == "paths.data_dir"

        assert apply_overrides(cfg, {"command": "energy-scan"}).command == "energy-scan"
        assert apply_overrides(cfg, {"command": "train", "target": "spiral"}).target == "spiral"
        assert apply_overrides(cfg, {"command": "train", "paths.data_dir": temp_dir}).command == "train"


def test_malformed_files():
    """
    Test missing files, broken YAML and non-mapping documents.
    """
    with tempfile.TemporaryDirectory() as temp_dir:
        with pytest.raises(ConfigIOError):
            parse_config(os.path.join(temp_dir, "missing.yaml"))
        with pytest.raises(ConfigValidationError):
            parse_config(_write(temp_dir, "seed: [1, 2\n"))
        with pytest.raises(ConfigValidationError):
            parse_config(_write(temp_dir, "- seed\n- 3\n"))


def test_dump_and_parse_give_equal_config():
    """
    Test that the effective config written to a run directory parses back unchanged.
    """
    cfg = apply_overrides(RunConfig(), {"seed": 11, "calibration.misalignment": [0.5, -1.0], "target": "spiral"})
    with tempfile.TemporaryDirectory() as temp_dir:
        path = dump_config(cfg, os.path.join(temp_dir, "effective_config.yaml"))
        assert parse_config(path) == cfg


def test_overrides():
    """
    Test dotted overrides, ignored None values and re-validation.
    """
    cfg = apply_overrides(RunConfig(), {"paths.data_dir": "/data", "seed": None, "network.rays_per_led": 500})
    assert cfg.paths.data_dir == "/data"
    assert cfg.seed == RunConfig().seed
    assert cfg.network.rays_per_led == 500
    with pytest.raises(ConfigValidationError):
        apply_overrides(cfg, {"threads": 0})


def test_section_conversions():
    """
    Test that config sections build the runtime objects they describe.
    """
    cfg = RunConfig(seed=4)
    tc = cfg.train.to_train_config(cfg.seed, cfg.geometry.guard)
    assert tc.seed == 4 and tc.batch_size == 128 and tc.guard == 0.1
    assert cfg.noise.to_noise_spec(4).seed == 4
    assert cfg.energy.to_energy_model().static_power_w == pytest.approx(0.17613)
    sweep = cfg.diffraction.to_sweep()
    assert sweep.grid_sizes[0] == 8 and isinstance(sweep.grid_sizes, tuple)
