"""
Tests for the wavefield service
"""

import numpy as np
import pytest
from scipy.integrate import trapezoid
from scipy.signal import find_peaks

from src.core.errors import ArgumentError, ConfigurationError, NumericalDomainError
from src.models.config import Grid, SlitConfig
from src.models.physics import FieldSlice
from src.services.wavefield import (
    intensity,
    make_two_slit_field,
    phase_gradient_slope,
    propagate_analytic,
    propagate_spectral,
)


def gaussian_width(cfg: SlitConfig, z: float) -> float:
    tau = z * 1e3 / cfg.rayleigh_range
    return cfg.slit_sigma * np.sqrt(1 + tau**2)


class TestSlitField:
    """Field at the slits"""

    def test_unit_norm(self, two_slit, wide_grid):
        field = make_two_slit_field(two_slit, wide_grid)
        assert field.z == 0.0
        assert field.norm() == pytest.approx(1.0, abs=1e-12)

    def test_disjoint_humps(self, wide_grid):
        cfg = SlitConfig(slit_separation=4.6, slit_sigma=0.3)
        density = intensity(make_two_slit_field(cfg, wide_grid))
        x = density.x
        middle = np.abs(x) < 0.5
        assert trapezoid(np.where(middle, density.values, 0.0), x) < 1e-6

    def test_grid_too_narrow(self, two_slit):
        with pytest.raises(ConfigurationError):
            make_two_slit_field(two_slit, Grid(x_min=-3.0, x_max=3.0, n_points=601))

    def test_analytic_at_zero_matches_slit_field(self, two_slit, wide_grid):
        start = make_two_slit_field(two_slit, wide_grid)
        again = propagate_analytic(two_slit, 0.0, wide_grid)
        np.testing.assert_allclose(again.amplitude, start.amplitude, atol=1e-14)


class TestPropagation:
    """Closed-form and spectral propagation"""

    def test_negative_distance(self, two_slit, wide_grid):
        with pytest.raises(ArgumentError):
            propagate_analytic(two_slit, -0.1, wide_grid)
        with pytest.raises(ArgumentError):
            propagate_spectral(propagate_analytic(two_slit, 2.0, wide_grid), -0.1)

    def test_single_slit_width(self, single_slit, narrow_grid):
        for z in (0.5, 1.5, 3.0):
            density = intensity(propagate_analytic(single_slit, z, narrow_grid))
            variance = trapezoid(density.x**2 * density.values, density.x)
            assert np.sqrt(variance) == pytest.approx(gaussian_width(single_slit, z), rel=1e-6)

    def test_spectral_matches_analytic(self, two_slit, wide_grid):
        start = propagate_analytic(two_slit, 2.0, wide_grid)
        stepped = propagate_spectral(start, 1.0)
        exact = propagate_analytic(two_slit, 3.0, wide_grid)
        assert stepped.z == pytest.approx(3.0)
        diff = np.abs(intensity(stepped).values - intensity(exact).values)
        assert diff.max() < 1e-6

    def test_spectral_steps_compose(self, two_slit, wide_grid):
        start = propagate_analytic(two_slit, 2.0, wide_grid)
        twice = propagate_spectral(propagate_spectral(start, 0.3), 0.5)
        once = propagate_spectral(start, 0.8)
        assert twice.z == pytest.approx(once.z)
        np.testing.assert_allclose(twice.amplitude, once.amplitude, rtol=0, atol=1e-12)

    def test_tilted_beam_drifts_at_its_slope(self, narrow_grid):
        v = 1e-3
        x = narrow_grid.x
        envelope = np.exp(-(x**2) / 2.0)
        k = 2 * np.pi / (943.0 * 1e-6)
        field = FieldSlice(z=0.0, grid=narrow_grid, amplitude=envelope * np.exp(1j * k * v * x), wavelength=943.0)
        later = intensity(propagate_spectral(field, 1.0))
        centroid = trapezoid(later.x * later.values, later.x)
        assert centroid == pytest.approx(v * 1e3, abs=1e-5)

    def test_spectral_edge_mass(self):
        grid = Grid(x_min=-2.0, x_max=2.0, n_points=257)
        psi = np.exp(-((grid.x - 1.9) ** 2) / 0.04).astype(complex)
        field = FieldSlice(z=0.0, grid=grid, amplitude=psi, wavelength=943.0)
        with pytest.raises(NumericalDomainError):
            propagate_spectral(field, 0.01)

    def test_fringe_spacing(self):
        cfg = SlitConfig(slit_separation=4.7, slit_sigma=0.1)
        grid = Grid(x_min=-16.0, x_max=16.0, n_points=8193)
        z = 3.0
        density = intensity(propagate_analytic(cfg, z, grid))
        peaks, _ = find_peaks(density.values)
        peaks = peaks[np.abs(density.x[peaks]) < 3.0]
        spacing = np.polyfit(np.arange(len(peaks)), density.x[peaks], 1)[0]
        expected = cfg.wavelength * 1e-6 * z * 1e3 / cfg.slit_separation
        assert len(peaks) >= 5
        assert spacing == pytest.approx(expected, rel=0.01)


class TestPhaseGradient:
    """Guidance ratio from the phase gradient"""

    def test_single_gaussian_slope(self, single_slit, narrow_grid):
        z = 2.0
        kxk = phase_gradient_slope(propagate_analytic(single_slit, z, narrow_grid))
        z_mm = z * 1e3
        zr = single_slit.rayleigh_range
        inner = np.abs(kxk.x_samples) < 2.0
        expected = kxk.x_samples * z_mm / (zr**2 + z_mm**2)
        assert not kxk.mask[inner].any()
        np.testing.assert_allclose(kxk.values[inner], expected[inner], atol=1e-6)
        assert kxk.metadata["source"] == "phase_gradient"

    def test_plane_wave_tilt(self, narrow_grid):
        v = 2e-3
        x = narrow_grid.x
        field = FieldSlice(z=0.0, grid=narrow_grid, wavelength=943.0,
                           amplitude=np.exp(-(x**2) / 8.0) * np.exp(2j * np.pi / 943e-6 * v * x))
        kxk = phase_gradient_slope(field)
        inner = np.abs(x) < 4.0
        assert not kxk.mask[inner].any()
        np.testing.assert_allclose(kxk.values[inner], v, rtol=1e-3)

    def test_second_order_convergence(self, single_slit):
        z = 2.0
        z_mm = z * 1e3
        zr = single_slit.rayleigh_range
        errors = []
        for n in (401, 801):
            grid = Grid(x_min=-4.0, x_max=4.0, n_points=n)
            kxk = phase_gradient_slope(propagate_analytic(single_slit, z, grid))
            inner = np.abs(grid.x) < 1.5
            expected = grid.x * z_mm / (zr**2 + z_mm**2)
            errors.append(np.max(np.abs(kxk.values[inner] - expected[inner])))
        assert errors[0] / errors[1] > 3.0

    def test_tails_are_masked(self, narrow_grid):
        cfg = SlitConfig.single_slit(slit_sigma=0.1)
        kxk = phase_gradient_slope(make_two_slit_field(cfg, narrow_grid))
        assert kxk.mask[0] and kxk.mask[-1]
        assert np.isnan(kxk.values[0])
        assert not kxk.mask[np.argmin(np.abs(kxk.x_samples))]
