# multilayer_onn/tests/test_calibration.py
# Purpose: Unit tests for simulated hardware probing, neuron exclusion, weight transfer and alignment

"""
Tests for the calibration package.
"""

import os
import tempfile

import numpy as np
import pytest

from multilayer_onn.calibration.alignment import AlignmentObjective, optimize_weight_shifts
from multilayer_onn.calibration.measurement import (
    CalibrationMap,
    ProbePlan,
    exclude_neurons,
    load_calibration,
    measure_weight_response,
    save_calibration,
    transfer_weights,
)
from multilayer_onn.calibration.system import SimulatedSystem
from multilayer_onn.errors import (
    CoverageError,
    DivisionGuardError,
    InfeasibleCalibrationError,
    InvalidArgumentError,
    ShapeError,
)
from multilayer_onn.geometry.layout import default_stage_geometries


def _calibration(gains, offsets, p=4, n=4):
    return CalibrationMap(
        weight_gain=np.ones((n, p)),
        extinction=np.zeros((n, p)),
        neuron_gain=np.asarray(gains, dtype=float),
        neuron_offset=np.asarray(offsets, dtype=float),
        usable=np.ones(len(gains), dtype=bool),
    )


class TestSimulatedSystem:
    """The simulated stage."""

    def test_transmission_model(self, small_stage):
        """
        Test gain and extinction folding.
        """
        gain = np.full((4, 4), 2.0)
        ext = np.full((4, 4), 0.1)
        system = SimulatedSystem(small_stage, weight_gain=gain, extinction=ext)
        np.testing.assert_allclose(system.transmission(np.zeros((4, 4))), 0.2)
        np.testing.assert_allclose(system.transmission(np.ones((4, 4))), 2.0)

    def test_validation(self, small_stage, crosstalk_stage):
        """
        Test constructor checks.
        """
        with pytest.raises(ShapeError):
            SimulatedSystem(crosstalk_stage)
        with pytest.raises(InvalidArgumentError):
            SimulatedSystem(small_stage, extinction=np.ones((4, 4)))
        with pytest.raises(InvalidArgumentError):
            SimulatedSystem(small_stage, mode="holographic")

    def test_aligned_coupling_is_identity_on_target(self, small_stage):
        """
        Test that an aligned window puts unit power on its detector and nothing elsewhere.
        """
        coupling = SimulatedSystem(small_stage).coupling()
        for i in range(4):
            np.testing.assert_allclose(coupling[i], np.eye(4), atol=1e-12)

    def test_probe_noise_is_keyed(self, small_stage):
        """
        Test that probe noise depends on the read key.
        """
        system = SimulatedSystem(small_stage, probe_noise_sigma=0.01)
        values = np.ones(4)
        np.testing.assert_array_equal(system.read(values, 3, 0), system.read(values, 3, 0))
        assert not np.array_equal(system.read(values, 3, 0), system.read(values, 3, 1))
        np.testing.assert_array_equal(SimulatedSystem(small_stage).read(values, 3, 0), values)


class TestMeasurement:
    """Single-weight probing and neuron characterization."""

    def test_ideal_system_transfer_is_identity(self, small_stage):
        """
        Test that calibrating ideal hardware leaves trained weights unchanged.
        """
        cal = measure_weight_response(SimulatedSystem(small_stage))
        np.testing.assert_allclose(cal.weight_gain, 1.0, atol=1e-12)
        np.testing.assert_allclose(cal.extinction, 0.0, atol=1e-12)
        np.testing.assert_allclose(cal.neuron_gain, 1.0, atol=1e-12)
        np.testing.assert_allclose(cal.neuron_offset, 0.0, atol=1e-12)

        weights = np.random.default_rng(0).uniform(0.01, 1.0, (4, 4))
        np.testing.assert_allclose(transfer_weights(weights, cal), weights, atol=1e-9)

    def test_recovers_injected_variability(self, small_stage):
        """
        Test recovery of injected weight gains, extinction and neuron parameters.
        """
        rng = np.random.default_rng(1)
        gain = rng.uniform(0.7, 1.3, (4, 4))
        system = SimulatedSystem(
            small_stage,
            weight_gain=gain,
            extinction=np.full((4, 4), 0.02),
            neuron_gain=np.array([1.1, 0.9]),
            neuron_offset=np.array([0.05, -0.03]),
        )
        cal = measure_weight_response(system)
        np.testing.assert_allclose(cal.weight_gain, gain / gain.mean(), rtol=1e-9)
        np.testing.assert_allclose(cal.extinction, 0.02, rtol=1e-9)
        np.testing.assert_allclose(cal.neuron_gain, [1.1, 0.9], rtol=1e-9)
        np.testing.assert_allclose(cal.neuron_offset, [0.05, -0.03], atol=1e-12)

    def test_transfer_compensates_gains(self, small_stage):
        """
        Test that pre-compensated weights give a uniform effective response.
        """
        rng = np.random.default_rng(2)
        gain = rng.uniform(0.6, 1.4, (4, 4))
        system = SimulatedSystem(small_stage, weight_gain=gain)
        cal = measure_weight_response(system)
        weights = rng.uniform(0.05, 0.5, (4, 4))
        effective = system.transmission(transfer_weights(weights, cal, w_max=2.0))
        ratio = effective / weights
        np.testing.assert_allclose(ratio, ratio.mean(), rtol=1e-9)

    def test_calibration_restores_correlation(self):
        """
        Test that weight transfer on a 64 x 100 stage with 20% gain spread restores the ideal outputs.
        """
        geom = default_stage_geometries()[0]
        rng = np.random.default_rng(7)
        gain = np.clip(rng.normal(1.0, 0.2, (64, 100)), 0.5, None)
        system = SimulatedSystem(geom, weight_gain=gain, extinction=np.full((64, 100), 0.02))
        weights = rng.uniform(0.0, 0.5, (64, 100))
        probes = np.eye(64)
        ideal = (probes @ weights).ravel()

        raw = system.stage_signals(probes, weights).ravel()
        cal = measure_weight_response(system)
        calibrated = system.stage_signals(probes, transfer_weights(weights, cal)).ravel()

        assert np.corrcoef(ideal, raw)[0, 1] < 0.99
        assert np.corrcoef(ideal, calibrated)[0, 1] >= 0.99

    def test_transfer_zeroes_excluded_columns(self):
        """
        Test that excluded neurons lose both detector columns.
        """
        cal = _calibration([1.0, 1.0], [0.0, 0.0])
        cal.usable = np.array([True, False])
        out = transfer_weights(np.full((4, 4), 0.5), cal)
        assert not out[:, 2:].any()
        np.testing.assert_allclose(out[:, :2], 0.5)

    def test_division_guard(self):
        """
        Test that a dead weight on a usable neuron refuses transfer.
        """
        cal = _calibration([1.0, 1.0], [0.0, 0.0])
        cal.weight_gain[1, 3] = 0.0
        with pytest.raises(DivisionGuardError):
            transfer_weights(np.full((4, 4), 0.5), cal)
        cal.usable = np.array([True, False])
        transfer_weights(np.full((4, 4), 0.5), cal)

    def test_probe_plan_coverage(self, small_stage):
        """
        Test that a plan leaving weights unprobed is rejected.
        """
        plan = ProbePlan(tuple((i, j) for i in range(4) for j in range(4) if (i, j) != (2, 1)))
        with pytest.raises(CoverageError) as exc:
            measure_weight_response(SimulatedSystem(small_stage), plan)
        assert exc.value.missing == [(2, 1)]

    def test_raytraced_probing(self, small_stage):
        """
        Test that ray-traced probing recovers injected gains up to Monte Carlo noise.
        """
        gain = np.random.default_rng(3).uniform(0.7, 1.3, (4, 4))
        system = SimulatedSystem(small_stage, weight_gain=gain, mode="raytraced", rays_per_led=200000)
        cal = measure_weight_response(system, seed=5)
        ratio = cal.weight_gain / gain
        np.testing.assert_allclose(ratio, ratio.mean(), rtol=0.08)

    @pytest.mark.slow
    def test_raytraced_probing_precise(self, small_stage):
        """
        Test recovery of injected gains within 2% at a million rays per emitter.
        """
        gain = np.random.default_rng(4).uniform(0.7, 1.3, (4, 4))
        system = SimulatedSystem(small_stage, weight_gain=gain, mode="raytraced", rays_per_led=4000000)
        cal = measure_weight_response(system, seed=6, threads=4)
        ratio = cal.weight_gain / gain
        np.testing.assert_allclose(ratio, ratio.mean(), rtol=0.02)

    def test_save_and_load(self):
        """
        Test calibration files.
        """
        cal = _calibration([1.0, 0.8], [0.01, -0.02])
        cal.usable = np.array([True, False])
        with tempfile.TemporaryDirectory() as temp_dir:
            path = save_calibration(cal, os.path.join(temp_dir, "stage_0.json"), {"stage": 0})
            loaded = load_calibration(path)
        np.testing.assert_array_equal(loaded.neuron_gain, cal.neuron_gain)
        np.testing.assert_array_equal(loaded.usable, [True, False])


class TestExclusion:
    """Neuron exclusion."""

    def test_outliers_are_excluded(self):
        """
        Test gain and offset tolerances.
        """
        cal = _calibration([1.0, 1.05, 0.5, 1.0], [0.0, 0.01, 0.0, 0.3], p=8)
        np.testing.assert_array_equal(exclude_neurons(cal, 0.3, 0.1), [True, True, False, False])

    def test_tightening_never_restores(self):
        """
        Test that tighter tolerances exclude a superset of neurons.
        """
        rng = np.random.default_rng(5)
        cal = _calibration(rng.normal(1.0, 0.2, 25), rng.normal(0.0, 0.05, 25), p=50)
        previous = exclude_neurons(cal, 0.5, 0.2)
        for tol in (0.4, 0.3, 0.2, 0.1):
            current = exclude_neurons(cal, tol, tol / 2)
            assert not np.any(current & ~previous)
            previous = current

    def test_everything_excluded(self):
        """
        Test that an empty usable population is an error.
        """
        cal = _calibration([1.0, 1.0], [0.5, -0.5])
        with pytest.raises(InfeasibleCalibrationError):
            exclude_neurons(cal, 0.3, 0.1)


class TestAlignment:
    """Window shift search."""

    def test_compensates_mask_misalignment(self, small_stage):
        """
        Test that a two-pixel mask offset is undone window by window.
        """
        system = SimulatedSystem(small_stage, misalignment=(0.0, 2.0))
        result = optimize_weight_shifts(system, max_shift=3, seed=1)
        assert np.all(result.shifts[..., 0] == 0)
        assert np.all(result.shifts[..., 1] == -2)
        assert all(b >= a for a, b in zip(result.trace, result.trace[1:]))
        assert result.trace[-1] > result.trace[0]

    def test_aligned_system_stays_put(self, small_stage):
        """
        Test that no window moves when the layout is already optimal.
        """
        result = optimize_weight_shifts(SimulatedSystem(small_stage))
        assert not result.shifts.any()
        assert result.sweeps == 1

    def test_shift_bound(self, small_stage):
        """
        Test that max_shift caps every move.
        """
        system = SimulatedSystem(small_stage, misalignment=(0.0, 2.0))
        result = optimize_weight_shifts(system, max_shift=1)
        assert np.all(np.abs(result.shifts) <= 1)
        with pytest.raises(InvalidArgumentError):
            optimize_weight_shifts(system, max_shift=-1)
        with pytest.raises(InvalidArgumentError):
            AlignmentObjective(crosstalk_weight=-1.0)
