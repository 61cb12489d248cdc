# multilayer_onn/tests/test_network.py
# Purpose: Unit tests for the hardware-constrained network, training and evaluation

"""
Tests for the network package.
"""

import json
import os
import tempfile
from unittest.mock import patch

import numpy as np
import pandas as pd
import pytest

from multilayer_onn.electronics.noise import NoiseSpec
from multilayer_onn.errors import (
    ConfigurationError,
    DomainError,
    FormatError,
    InconclusiveCheckError,
    ShapeError,
    TrainingDivergedError,
)
from multilayer_onn.geometry.layout import compile_mask, default_stage_geometries
from multilayer_onn.network.checkpoint import (
    load_checkpoint,
    save_checkpoint,
    write_confusion_csv,
    write_loss_curve_csv,
)
from multilayer_onn.network.evaluation import confusion_matrix, evaluate, linear_baseline
from multilayer_onn.network.model import (
    HardwareNetwork,
    LayerSpec,
    NoisyFidelity,
    attach_raytraced_optics,
    compile_network_masks,
    forward,
    pair_difference,
    predict,
)
from multilayer_onn.network.training import (
    Gradients,
    TrainConfig,
    draw_augmentation,
    gradient_check,
    loss_and_gradients,
    project_gradient,
    train,
)


def _reference_forward(net, x):
    # straight loops over emitters, detectors and pairs
    a = list(x)
    for layer in net.layers:
        s = [sum(a[i] * layer.weights[i, j] for i in range(layer.n_in)) for j in range(layer.n_out)]
        if layer.is_output:
            return np.array(s)
        a = [
            max(0.0, layer.gains[k] * (s[2 * k] - s[2 * k + 1]) + layer.offsets[k]) * layer.usable[k]
            for k in range(layer.n_pairs)
        ]
    raise AssertionError("no output layer")


def test_build_default_network():
    """
    Test the 64-50-50-64 architecture and its initial weight range.
    """
    net = HardwareNetwork.build(seed=1)
    assert [l.weights.shape for l in net.layers] == [(64, 100), (50, 100), (50, 64)]
    assert [l.is_output for l in net.layers] == [False, False, True]
    for layer in net.layers:
        assert layer.weights.min() >= layer.w_min
        assert layer.weights.max() <= layer.w_max

    with pytest.raises(ShapeError):
        HardwareNetwork.build(n_out=63)


def test_layers_must_chain():
    """
    Test that mismatched layer widths are rejected.
    """
    with pytest.raises(ShapeError):
        HardwareNetwork([LayerSpec(4, 3), LayerSpec(2, 1, is_output=True)], n_classes=2)
    with pytest.raises(ShapeError):
        LayerSpec(4, 3, weights=np.ones((4, 5)))


def test_pair_difference():
    """
    Test rectified pairwise differencing.
    """
    out = pair_difference(np.array([0.5, 0.2, 0.1, 0.4]), np.array([0.0, 0.1]))
    np.testing.assert_allclose(out, [0.3, 0.0])
    with pytest.raises(ShapeError):
        pair_difference(np.ones(3), np.zeros(1))


def test_algebraic_forward_matches_loops():
    """
    Test the vectorized forward pass against explicit loops on random inputs.
    """
    net = HardwareNetwork.build(n_in=8, hidden=(5, 4), n_out=6, n_classes=3, seed=2)
    net.layers[0].offsets[:] = [0.05, -0.02, 0.1, 0.0, 0.03]
    net.layers[1].usable[2] = False
    rng = np.random.default_rng(0)
    inputs = rng.random((100, 8))
    out = forward(inputs, net).output
    for x, row in zip(inputs, out):
        np.testing.assert_allclose(row, _reference_forward(net, x), rtol=1e-10, atol=1e-15)

    single = forward(inputs[0], net)
    assert single.output.shape == (6,)
    assert [a.shape for a in single.activations] == [(5,), (4,)]
    assert predict(net, inputs).shape == (100,)


def test_forward_validation():
    """
    Test input range and fidelity checks.
    """
    net = HardwareNetwork.build(n_in=4, hidden=(3,), n_out=2, n_classes=2)
    with pytest.raises(DomainError):
        forward(np.full(4, 1.5), net)
    with pytest.raises(ShapeError):
        forward(np.ones(5), net)
    with pytest.raises(ConfigurationError):
        forward(np.ones(4), net, fidelity="raytraced")


def test_noisy_fidelity_without_noise_is_algebraic():
    """
    Test that a zero-noise noisy level reproduces the ideal network exactly.
    """
    net = HardwareNetwork.build(n_in=6, hidden=(4,), n_out=4, n_classes=2, seed=3)
    inputs = np.random.default_rng(1).random((20, 6))
    quiet = NoisyFidelity(noise=NoiseSpec())
    np.testing.assert_array_equal(forward(inputs, net, "noisy", noisy=quiet).output, forward(inputs, net).output)

    loud = NoisyFidelity(noise=NoiseSpec(relative_weight_sigma=0.1, pd_additive_sigma=0.05, seed=1))
    noisy_out = forward(inputs, net, "noisy", seed=4, noisy=loud).output
    assert noisy_out.min() >= 0.0
    np.testing.assert_array_equal(noisy_out, forward(inputs, net, "noisy", seed=4, noisy=loud).output)


class TestTraining:
    """Projected Adam and analytic gradients."""

    def test_gradient_check(self):
        """
        Test analytic gradients of a small 4-3-2 network against finite differences.
        """
        net = HardwareNetwork.build(n_in=4, hidden=(3,), n_out=2, n_classes=2, seed=5)
        net.layers[0].offsets[:] = [0.3, 0.25, 0.35]
        x = np.array([0.9, 0.1, 0.6, 0.3])
        assert gradient_check(net, x, label=1) < 1e-5

    def test_gradient_check_near_bound_is_inconclusive(self):
        """
        Test that a weight on its bound makes the check refuse to run.
        """
        net = HardwareNetwork.build(n_in=4, hidden=(3,), n_out=2, n_classes=2, seed=5)
        net.layers[1].weights[0, 0] = net.layers[1].w_min
        with pytest.raises(InconclusiveCheckError):
            gradient_check(net, np.full(4, 0.5), label=0)

    def test_project_gradient(self):
        """
        Test that only outward steps on a bound are blocked.
        """
        w = np.array([0.01, 0.5, 1.0, 0.01])
        g = np.array([1.0, 1.0, -1.0, -1.0])
        np.testing.assert_array_equal(project_gradient(w, g, 0.01, 1.0), [0.0, 1.0, 0.0, -1.0])

    def test_batch_order_does_not_change_gradients(self):
        """
        Test that shuffling samples inside a batch leaves the gradients unchanged.
        """
        net = HardwareNetwork.build(n_in=6, hidden=(4,), n_out=4, n_classes=3, seed=6)
        rng = np.random.default_rng(2)
        x, y = rng.random((16, 6)), rng.integers(0, 3, 16)
        order = rng.permutation(16)
        loss_a, grads_a = loss_and_gradients(net, x, y)
        loss_b, grads_b = loss_and_gradients(net, x[order], y[order])
        assert loss_a == pytest.approx(loss_b, rel=1e-12)
        for ga, gb in zip(grads_a.weights, grads_b.weights):
            np.testing.assert_allclose(ga, gb, rtol=1e-10, atol=1e-15)

    def test_trains_separable_blobs(self, blobs):
        """
        Test that the constrained network learns a linear boundary and keeps its weights in bounds.
        """
        net = HardwareNetwork.build(n_in=2, hidden=(6,), n_out=2, n_classes=2, seed=0)
        before = [w.copy() for w in net.weights()]
        cfg = TrainConfig(learning_rate=0.02, batch_size=32, epochs=80, augment=False, learn_offsets=True)
        result = train(blobs, net, cfg)

        assert len(result.loss_curve) == 80
        assert result.loss_curve[-1]["loss"] < result.loss_curve[0]["loss"]
        assert evaluate(result.net, blobs).accuracy == 1.0
        for layer in result.net.layers:
            assert layer.weights.min() >= layer.w_min
            assert layer.weights.max() <= layer.w_max
        for w, b in zip(net.weights(), before):
            np.testing.assert_array_equal(w, b)

    def test_training_is_reproducible(self, blobs):
        """
        Test that the same seed gives bit-identical weights.
        """
        net = HardwareNetwork.build(n_in=2, hidden=(3,), n_out=2, n_classes=2, seed=0)
        cfg = TrainConfig(batch_size=50, epochs=2, seed=9)
        a = train(blobs, net, cfg).net
        b = train(blobs, net, cfg).net
        for wa, wb in zip(a.weights(), b.weights()):
            np.testing.assert_array_equal(wa, wb)

    def test_divergence_is_reported(self, blobs):
        """
        Test that a non-finite loss stops training with diagnostics.
        """
        net = HardwareNetwork.build(n_in=2, hidden=(3,), n_out=2, n_classes=2, seed=0)
        bad = (float("nan"), Gradients(weights=[np.zeros_like(w) for w in net.weights()], offsets=[None, None]))
        with patch("multilayer_onn.network.training.loss_and_gradients", return_value=bad):
            with pytest.raises(TrainingDivergedError) as exc:
                train(blobs, net, TrainConfig(epochs=1, augment=False))
        assert exc.value.diagnostics["epoch"] == 0
        assert exc.value.diagnostics["batch"] == 0

    def test_shape_mismatch(self, blobs):
        """
        Test that a dataset of the wrong width is rejected.
        """
        net = HardwareNetwork.build(n_in=3, hidden=(3,), n_out=2, n_classes=2)
        with pytest.raises(ShapeError):
            train(blobs, net, TrainConfig(epochs=1))

    def test_crosstalk_augmentation_is_normalized(self):
        """
        Test that an always-on crosstalk augmentation uses matrices scaled to the aligned overlap.
        """
        geometries = default_stage_geometries()
        net = HardwareNetwork.build(seed=0)
        cfg = TrainConfig(augment_probability=1.0, crosstalk_shift=0.0001)
        aug = draw_augmentation(net, cfg, 4, np.random.default_rng(0), geometries)
        assert all(c is not None for c in aug.crosstalk)
        for c, layer in zip(aug.crosstalk, net.layers):
            assert c.shape == (layer.n_in, layer.n_out, layer.n_out)
            assert np.mean(np.einsum("ijj->ij", c)) == pytest.approx(1.0, rel=1e-3)
        assert aug.offsets[-1] is None
        assert aug.offsets[0].shape == (4, 50)

    def test_crosstalk_shifts_are_drawn_per_window(self, small_stage):
        """
        Test that every window gets its own displacement.
        """
        net = HardwareNetwork.build(n_in=4, hidden=(), n_out=4, n_classes=4, seed=3)
        cfg = TrainConfig(augment_probability=1.0, crosstalk_shift=0.3)
        aug = draw_augmentation(net, cfg, 1, np.random.default_rng(4), [small_stage])
        own = np.einsum("ijj->ij", aug.crosstalk[0])
        assert np.ptp(own) > 0.01
        assert np.all(own <= 1.0 + 1e-12)

    def test_gradient_check_through_crosstalk(self, small_stage):
        """
        Test analytic gradients through the per-window mixing against finite differences.
        """
        net = HardwareNetwork.build(n_in=4, hidden=(), n_out=4, n_classes=4, seed=3)
        cfg = TrainConfig(augment_probability=1.0, crosstalk_shift=0.3)
        aug = draw_augmentation(net, cfg, 1, np.random.default_rng(4), [small_stage])
        x = np.array([0.9, 0.2, 0.6, 0.4])
        assert gradient_check(net, x, label=2, augmentation=aug) < 1e-5
        _, plain = loss_and_gradients(net, x[None, :], np.array([2]))
        _, mixed = loss_and_gradients(net, x[None, :], np.array([2]), aug)
        assert not np.allclose(plain.weights[0], mixed.weights[0])


class TestEvaluation:
    """Scoring and baselines."""

    def test_confusion_matrix(self):
        """
        Test confusion counts.
        """
        m = confusion_matrix(np.array([0, 0, 1, 2]), np.array([0, 1, 1, 2]), 3)
        np.testing.assert_array_equal(m, [[1, 1, 0], [0, 1, 0], [0, 0, 1]])

    def test_evaluate_reports(self, blobs):
        """
        Test the evaluation result at the algebraic level.
        """
        net = HardwareNetwork.build(n_in=2, hidden=(3,), n_out=2, n_classes=2, seed=1)
        result = evaluate(net, blobs)
        assert result.fidelity == "algebraic"
        assert result.confusion.shape == (2, 2)
        assert int(result.confusion.sum()) == len(blobs)
        assert result.correlations == [1.0]
        assert 0.0 <= result.accuracy <= 1.0

    def test_confusion_keeps_predictions_outside_dataset_classes(self, blobs):
        """
        Test that a network scoring more classes than the dataset holds loses no sample.
        """
        net = HardwareNetwork.build(n_in=2, hidden=(3,), n_out=8, n_classes=4, seed=1)
        net.layers[0].weights[:, 0::2] = 1.0
        net.layers[0].weights[:, 1::2] = 0.01
        net.layers[1].weights[:] = 0.01
        net.layers[1].weights[:, 3] = 1.0
        result = evaluate(net, blobs)
        assert result.confusion.shape == (4, 4)
        assert int(result.confusion.sum()) == len(blobs)
        np.testing.assert_array_equal(result.confusion[:, 3], blobs.class_counts().tolist() + [0, 0])
        assert result.accuracy == pytest.approx(np.trace(result.confusion) / len(blobs))

    def test_linear_baseline_on_blobs(self, blobs):
        """
        Test that softmax regression separates linearly separable data.
        """
        assert linear_baseline(blobs, seed=0) == 1.0

    def test_raytraced_level(self, small_stage):
        """
        Test that ray-traced transfer matrices track the algebraic stage.
        """
        net = HardwareNetwork.build(n_in=4, hidden=(), n_out=4, n_classes=4, seed=2)
        masks = compile_network_masks(net, [small_stage])
        np.testing.assert_allclose(masks[0].window_values(), net.layers[0].weights, atol=0.5 / 255 + 1e-12)
        attach_raytraced_optics(net, [small_stage], masks, rays_per_led=200000, seed=3)
        x = np.array([[1.0, 0.5, 0.25, 0.75]])
        np.testing.assert_allclose(forward(x, net, "raytraced").output, forward(x, net).output, rtol=0.05)

        with pytest.raises(ConfigurationError):
            compile_network_masks(net, [small_stage, small_stage])


class TestCheckpoint:
    """Checkpoint and artifact files."""

    def test_save_and_load(self):
        """
        Test that a checkpoint restores the network and metadata.
        """
        net = HardwareNetwork.build(n_in=4, hidden=(3,), n_out=4, n_classes=3, seed=7)
        net.layers[0].usable[1] = False
        net.layers[0].gains[:] = [1.1, 0.9, 1.0]
        with tempfile.TemporaryDirectory() as temp_dir:
            path = save_checkpoint(net, os.path.join(temp_dir, "checkpoint.json"), {"seed": 7})
            loaded, metadata = load_checkpoint(path)
        assert metadata == {"seed": 7}
        assert loaded.n_classes == 3
        for a, b in zip(loaded.layers, net.layers):
            np.testing.assert_array_equal(a.weights, b.weights)
            np.testing.assert_array_equal(a.gains, b.gains)
            np.testing.assert_array_equal(a.usable, b.usable)
            assert a.is_output == b.is_output

    def test_version_and_garbage(self):
        """
        Test that unsupported or corrupt files are rejected.
        """
        with tempfile.TemporaryDirectory() as temp_dir:
            path = os.path.join(temp_dir, "bad.json")
            with open(path, "w") as f:
                json.dump({"format_version": 99}, f)
            with pytest.raises(FormatError):
                load_checkpoint(path)
            with open(path, "w") as f:
                f.write("{not json")
            with pytest.raises(FormatError):
                load_checkpoint(path)

    def test_artifact_csvs(self):
        """
        Test the loss-curve and confusion exports.
        """
        with tempfile.TemporaryDirectory() as temp_dir:
            curve = write_loss_curve_csv([{"epoch": 1, "loss": 0.7}, {"epoch": 2, "loss": 0.5}], os.path.join(temp_dir, "loss.csv"))
            assert pd.read_csv(curve)["loss"].tolist() == [0.7, 0.5]
            conf = write_confusion_csv(np.array([[3, 1], [0, 4]]), os.path.join(temp_dir, "conf.csv"))
            frame = pd.read_csv(conf, index_col="class")
            assert list(frame.columns) == ["pred_0", "pred_1"]
            assert int(frame.loc["true_1", "pred_1"]) == 4
