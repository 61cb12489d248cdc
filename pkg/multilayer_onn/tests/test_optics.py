# multilayer_onn/tests/test_optics.py
# Purpose: Unit tests for the ideal, ray-traced and diffraction optics models

"""
Tests for the optics package.
"""

import os
import tempfile

import numpy as np
import pandas as pd
import pytest
from scipy import stats

from multilayer_onn.errors import AliasingError, DomainError, InvalidArgumentError, ShapeError
from multilayer_onn.geometry.layout import DetectorGrid, EmitterGrid, MaskPlane, StageGeometry, compile_mask
from multilayer_onn.geometry.mask_io import read_pgm
from multilayer_onn.optics.diffraction import (
    SourceSpec,
    angular_spectrum_propagate,
    encircled_radius,
    required_grid_size,
)
from multilayer_onn.optics.export import write_intensity_pgm, write_signal_csv
from multilayer_onn.optics.ideal import ideal_mvm
from multilayer_onn.optics.raytrace import (
    collection_efficiency,
    raytrace_propagate,
    raytrace_transfer_matrix,
    sample_lambertian,
)


def test_ideal_mvm_matches_loops():
    """
    Test the ideal stage against an explicit double loop.
    """
    rng = np.random.default_rng(11)
    intensities = rng.random(64)
    weights = rng.random((64, 100))
    expected = np.zeros(100)
    for j in range(100):
        for i in range(64):
            expected[j] += intensities[i] * weights[i, j]
    np.testing.assert_allclose(ideal_mvm(intensities, weights), expected, rtol=1e-12)

    batch = rng.random((5, 64))
    assert ideal_mvm(batch, weights).shape == (5, 100)


def test_ideal_mvm_validation():
    """
    Test shape, sign and finiteness checks.
    """
    with pytest.raises(ShapeError):
        ideal_mvm(np.ones(3), np.ones((4, 2)))
    with pytest.raises(DomainError):
        ideal_mvm(-np.ones(4), np.ones((4, 2)))
    with pytest.raises(InvalidArgumentError):
        ideal_mvm(np.array([1.0, np.nan, 0.0, 0.0]), np.ones((4, 2)))
    with pytest.raises(InvalidArgumentError):
        ideal_mvm(np.ones(4), np.full((4, 2), np.inf))
    assert not ideal_mvm(np.zeros(4), np.ones((4, 2))).any()


def test_lambertian_sampling_stays_in_cone():
    """
    Test that truncated cosine sampling respects the cone and follows the cosine law.
    """
    rng = np.random.default_rng(0)
    cos_t, phi = sample_lambertian(rng, 200000, max_angle=0.3)
    assert cos_t.min() >= np.cos(0.3) - 1e-12
    assert phi.min() >= 0 and phi.max() < 2 * np.pi

    # for the full hemisphere sin^2(theta) is uniform, so its mean is 1/2
    cos_full, _ = sample_lambertian(rng, 200000)
    assert np.mean(1.0 - cos_full ** 2) == pytest.approx(0.5, abs=0.01)


def test_lambertian_cosine_density():
    """
    Test that cos(theta) over the hemisphere has density 2 cos(theta) by a binned chi-square test.
    """
    edges = np.linspace(0.0, 1.0, 21)
    expected = 1_000_000 * np.diff(edges ** 2)

    cos_t, _ = sample_lambertian(np.random.default_rng(2024), 1_000_000)
    observed, _ = np.histogram(cos_t, bins=edges)
    assert stats.chisquare(observed, expected).pvalue > 0.01

    # an isotropic emitter is uniform in cos(theta) and must fail the same test
    uniform, _ = np.histogram(np.random.default_rng(2024).random(1_000_000), bins=edges)
    assert stats.chisquare(uniform, expected).pvalue < 1e-6


class TestRaytrace:
    """Monte Carlo propagation through the weight mask."""

    def test_transfer_matrix_matches_weights(self, small_stage):
        """
        Test that the normalized ray-traced matrix recovers the mask transmissions.
        """
        rng = np.random.default_rng(2)
        weights = 0.2 + 0.8 * rng.random((4, 4))
        mask = compile_mask(weights, small_stage)
        T = raytrace_transfer_matrix(small_stage, mask, rays_per_led=200000, seed=7)
        np.testing.assert_allclose(T, mask.window_values(), atol=0.08)

    def test_dark_inputs(self, small_stage):
        """
        Test that zero intensities and a dark mask both give zero signal.
        """
        mask = compile_mask(np.ones((4, 4)), small_stage)
        assert not raytrace_propagate(small_stage, mask, np.zeros(4), 1000, seed=0).any()

        dark = compile_mask(np.zeros((4, 4)), small_stage)
        assert not raytrace_propagate(small_stage, dark, np.ones(4), 5000, seed=0).any()

    def test_conservation_and_linearity(self, small_stage):
        """
        Test that detected power never exceeds emitted power and emitters superpose.
        """
        mask = compile_mask(np.ones((4, 4)), small_stage)
        a = np.array([1.0, 0.0, 0.5, 0.0])
        b = np.array([0.0, 2.0, 0.0, 0.3])
        out_a = raytrace_propagate(small_stage, mask, a, 50000, seed=3)
        out_b = raytrace_propagate(small_stage, mask, b, 50000, seed=3)
        out_ab = raytrace_propagate(small_stage, mask, a + b, 50000, seed=3)
        assert out_ab.sum() <= (a + b).sum()
        # identical per-emitter streams make superposition exact
        np.testing.assert_allclose(out_ab, out_a + out_b, rtol=1e-12)

    def test_seed_and_thread_reproducibility(self, small_stage):
        """
        Test that results depend on the seed but not on the worker count.
        """
        mask = compile_mask(np.ones((4, 4)), small_stage)
        I = np.ones(4)
        serial = raytrace_propagate(small_stage, mask, I, 20000, seed=5, batch_size=4096)
        threaded = raytrace_propagate(small_stage, mask, I, 20000, seed=5, threads=4, batch_size=4096)
        np.testing.assert_array_equal(serial, threaded)
        other = raytrace_propagate(small_stage, mask, I, 20000, seed=6, batch_size=4096)
        assert not np.array_equal(serial, other)

    def test_standard_error_scaling(self, small_stage):
        """
        Test that the spread over seeds halves each time the ray budget grows fourfold.
        """
        mask = compile_mask(np.ones((4, 4)), small_stage)
        I = np.ones(4)
        spreads = [
            np.std([raytrace_propagate(small_stage, mask, I, rays, seed=s).sum() for s in range(150)], ddof=1)
            for rays in (250, 1000, 4000)
        ]
        for coarse, fine in zip(spreads, spreads[1:]):
            assert coarse / fine == pytest.approx(2.0, rel=0.25)

    def test_input_validation(self, small_stage):
        """
        Test intensity checks.
        """
        mask = compile_mask(np.ones((4, 4)), small_stage)
        with pytest.raises(ShapeError):
            raytrace_propagate(small_stage, mask, np.ones(3), 100, seed=0)
        with pytest.raises(DomainError):
            raytrace_propagate(small_stage, mask, np.array([1.0, -1.0, 0.0, 0.0]), 100, seed=0)

    @pytest.mark.slow
    def test_matches_ideal_after_collection_constant(self, small_stage):
        """
        Test ray-traced outputs against the ideal stage scaled by one collection constant.
        """
        collection = collection_efficiency(small_stage, rays_per_led=4000000, seed=100)
        rng = np.random.default_rng(9)
        for k in range(5):
            weights = 0.3 + 0.7 * rng.random((4, 4))
            intensities = 0.3 + 0.7 * rng.random(4)
            mask = compile_mask(weights, small_stage)
            traced = raytrace_propagate(small_stage, mask, intensities, 4000000, seed=k)
            expected = collection * ideal_mvm(intensities, mask.window_values())
            np.testing.assert_allclose(traced, expected, rtol=0.01)


def _point_source_stage(d2: float) -> StageGeometry:
    # 3-pixel (108 um) window under a near-point emitter
    return StageGeometry(
        emitters=EmitterGrid(1, 1, pitch=10.0, die_size=1.0),
        detectors=DetectorGrid(1, 1, pitch=215.0, active_size=215.0),
        mask=MaskPlane(pixel_pitch=36.0, resolution=(33, 33)),
        d1=1.0e5,
        d2=d2,
    )


class TestDiffraction:
    """Randomized-phase angular spectrum solver."""

    def test_required_grid_size(self):
        """
        Test the band-limit grid size.
        """
        assert required_grid_size(9.0, 0.525, 1.0e5) == 649
        assert required_grid_size(10.0, 1.0, 100.0) == 1

    def test_aliasing_is_rejected(self):
        """
        Test that a grid too small for the distance raises with the required size.
        """
        geom = _point_source_stage(1.0e5)
        mask = compile_mask(np.ones((1, 1)), geom, guard=0.0)
        with pytest.raises(AliasingError) as exc:
            angular_spectrum_propagate(SourceSpec(grid_pitch=9.0, grid_size=256), geom, mask, realizations=1)
        assert exc.value.required_grid_size == 649

    def test_far_field_blur_and_energy(self):
        """
        Test the spot of a small window against the sinc^2 far-field pattern and energy conservation.
        """
        geom = _point_source_stage(1.0e5)
        mask = compile_mask(np.ones((1, 1)), geom, guard=0.0)
        assert int(mask.rects[0, 0, 2]) == 3
        spec = SourceSpec(grid_pitch=9.0, grid_size=1024)
        report = angular_spectrum_propagate(spec, geom, mask, wavelength=0.525, realizations=1, seed=0)

        assert report.total_energy == pytest.approx(report.exit_energy, rel=1e-9)
        assert 0.0 <= report.leakage_fraction <= 1.0

        # far field of a window sampled by 12 solver points at 9 um: the periodic sinc
        # (Dirichlet kernel) over one band, mapped to the detector plane by x = wavelength * d2 * f
        coords = (np.arange(1024) - 512) * 9.0
        f = coords / (0.525 * geom.d2)
        in_band = np.abs(f) < 1.0 / 18.0
        profile = np.where(in_band, (np.sinc(108.0 * f) / np.sinc(9.0 * f)) ** 2, 0.0)
        expected = encircled_radius(np.outer(profile, profile), coords)
        assert report.blur_radius == pytest.approx(expected, rel=0.2)

    def test_blur_grows_with_distance(self):
        """
        Test that a longer mask-to-detector gap widens the spot.
        """
        radii = []
        for d2 in (5.0e4, 1.0e5):
            geom = _point_source_stage(d2)
            mask = compile_mask(np.ones((1, 1)), geom, guard=0.0)
            spec = SourceSpec(grid_pitch=9.0, grid_size=1024)
            radii.append(angular_spectrum_propagate(spec, geom, mask, realizations=1).blur_radius)
        assert radii[1] > radii[0]

    def test_encircled_radius(self):
        """
        Test the encircled-energy radius on a single bright sample and an empty map.
        """
        coords = np.arange(-5, 6) * 2.0
        image = np.zeros((11, 11))
        image[5, 5] = 1.0
        assert encircled_radius(image, coords) == 0.0
        assert encircled_radius(np.zeros((11, 11)), coords) == 0.0


def test_export_files():
    """
    Test the signal CSV and intensity snapshot writers.
    """
    with tempfile.TemporaryDirectory() as temp_dir:
        csv_path = write_signal_csv(
            os.path.join(temp_dir, "signals.csv"),
            {"algebraic": np.array([1.0, 2.0]), "raytraced": np.array([0.9, 2.1])},
        )
        frame = pd.read_csv(csv_path)
        assert list(frame.columns) == ["detector", "algebraic", "raytraced"]
        assert frame["raytraced"].tolist() == [0.9, 2.1]

        pgm_path = write_intensity_pgm(os.path.join(temp_dir, "spot.pgm"), np.array([[0.0, 0.5], [1.0, 0.25]]))
        pixels, maxval = read_pgm(pgm_path)
        assert maxval == 65535
        assert pixels[1, 0] == 65535
        assert pixels[0, 0] == 0
