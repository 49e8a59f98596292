"""
Tests for the sensor simulation service
"""

import numpy as np
import pytest
from scipy.integrate import trapezoid

from src.core.errors import ConfigurationError, DegenerateInputError
from src.models.config import NoiseConfig, SlitConfig
from src.models.physics import CouplingConstant, PixelImage
from src.services.sensor_sim import (
    add_noise,
    normalize_legacy,
    normalize_magnified,
    pixel_kxk,
    project_to_pixels,
    scale_counts,
    subtract_background,
)
from src.services.wavefield import intensity, phase_gradient_slope, propagate_analytic
from src.services.weak_momentum import infer_kx_over_k

ZETA = CouplingConstant(373.5)


def gaussian_image(n_pixels: int = 200, peak: float = 1e-2) -> PixelImage:
    centers = (np.arange(n_pixels) - (n_pixels - 1) / 2) * 0.104
    shape = peak * np.exp(-centers**2 / 2.0)
    return PixelImage(z=2.0, pitch_um=26.0, magnification=4.0, pixel_centers=centers,
                      counts_R=shape * 0.6, counts_L=shape * 0.4)


class TestProjection:
    """Exact pixel integration and the polarization split"""

    def setup_method(self):
        self.cfg = SlitConfig()

    def test_channels_share_the_mass(self, wide_grid):
        field = propagate_analytic(self.cfg, 3.0, wide_grid)
        img = project_to_pixels(intensity(field), phase_gradient_slope(field), 26.0, 4.0, ZETA)
        assert img.counts_total.sum() == pytest.approx(1.0, abs=1e-6)
        v = pixel_kxk(phase_gradient_slope(field), img.pixel_centers)
        lit = img.counts_total > 0
        asym = (img.counts_R - img.counts_L)[lit] / img.counts_total[lit]
        np.testing.assert_allclose(asym, np.sin(ZETA.zeta * v[lit]), atol=1e-12)

    def test_pixels_symmetric_about_grid_center(self, wide_grid):
        field = propagate_analytic(self.cfg, 2.0, wide_grid)
        img = project_to_pixels(intensity(field), phase_gradient_slope(field), 26.0, 4.0, ZETA)
        np.testing.assert_allclose(img.pixel_centers, -img.pixel_centers[::-1], atol=1e-12)
        assert img.spacing == pytest.approx(0.104)

    def test_forward_inverse_identity(self, wide_grid, rng):
        for z in rng.uniform(2.0, 6.0, 3):
            field = propagate_analytic(self.cfg, float(z), wide_grid)
            aux = phase_gradient_slope(field)
            img = project_to_pixels(intensity(field), aux, 26.0, 4.0, ZETA)
            channels = normalize_magnified(img)
            kxk = infer_kx_over_k(channels.right, channels.left, ZETA)
            expected = pixel_kxk(aux, img.pixel_centers)
            keep = ~kxk.mask
            assert keep.sum() > 50
            np.testing.assert_allclose(kxk.values[keep], expected[keep], atol=1e-12, rtol=0)

    def test_row_too_short(self, wide_grid):
        field = propagate_analytic(self.cfg, 2.0, wide_grid)
        with pytest.raises(ConfigurationError):
            project_to_pixels(intensity(field), phase_gradient_slope(field), 26.0, 4.0, ZETA, n_pixels=10)

    def test_branch_violation(self, wide_grid):
        field = propagate_analytic(self.cfg, 2.0, wide_grid)
        with pytest.raises(ConfigurationError):
            project_to_pixels(intensity(field), phase_gradient_slope(field), 26.0, 4.0, CouplingConstant(1e5))


class TestNoise:
    """Poisson shot noise and background"""

    def test_background_only_mean(self):
        dark = gaussian_image(peak=0.0)
        noisy = add_noise(dark, NoiseConfig(photon_budget=1e6, background_level=5.0, rng_seed=11))
        counts = np.concatenate([noisy.counts_R, noisy.counts_L])
        assert abs(counts.mean() - 5.0) < 5 * np.sqrt(5.0) / np.sqrt(len(counts))

    def test_reproducible_per_frame(self):
        img = gaussian_image()
        noise = NoiseConfig(photon_budget=1e6, background_level=5.0, rng_seed=7)
        first = add_noise(img, noise, frame_index=3)
        again = add_noise(img, noise, frame_index=3)
        other = add_noise(img, noise, frame_index=4)
        np.testing.assert_array_equal(first.counts_R, again.counts_R)
        assert not np.array_equal(first.counts_R, other.counts_R)
        assert first.rng == f"PCG64:{7 ^ 3}"

    def test_subtraction_restores_totals(self):
        img = gaussian_image()
        noise = NoiseConfig(photon_budget=1e7, background_level=5.0, rng_seed=1)
        clean = subtract_background(add_noise(img, noise), 5.0)
        expected = scale_counts(img, 1e7).counts_total.sum()
        assert abs(clean.counts_total.sum() - expected) < 3 * np.sqrt(expected) + 2 * img.n_pixels

    def test_clamp_monotone_in_estimate(self):
        noisy = add_noise(gaussian_image(), NoiseConfig(photon_budget=1e5, background_level=5.0, rng_seed=5))
        previous = noisy
        for estimate in (1.0, 3.0, 5.0, 8.0, 20.0):
            clean = subtract_background(noisy, estimate)
            assert np.all(clean.counts_R >= 0) and np.all(clean.counts_L >= 0)
            assert np.all(clean.counts_R <= previous.counts_R)
            assert np.all(clean.counts_L <= previous.counts_L)
            previous = clean

    def test_large_budget_relative_error(self):
        img = gaussian_image(peak=1.0)
        noisy = add_noise(img, NoiseConfig(photon_budget=1e8, background_level=0.0, rng_seed=2))
        expected = 1e8 * img.counts_R
        bright = expected > 1e5
        rel = (noisy.counts_R[bright] - expected[bright]) / expected[bright]
        assert np.sqrt(np.mean(rel**2)) < 0.01


class TestNormalization:
    """Magnified and legacy normalization"""

    def frames(self, grid):
        cfg = SlitConfig()
        field = propagate_analytic(cfg, 2.0, grid)
        density, aux = intensity(field), phase_gradient_slope(field)
        return [scale_counts(project_to_pixels(density, aux, 10.0, m, ZETA), 1e8) for m in (1.0, 2.0)]

    def test_magnified_is_covariant(self, wide_grid):
        one, two = self.frames(wide_grid)
        d1 = normalize_magnified(one).total
        d2 = normalize_magnified(two).total
        assert d1.integral() == pytest.approx(1.0, abs=1e-12)
        resampled = np.interp(d2.x, d1.x, d1.values)
        assert trapezoid(np.abs(resampled - d2.values), d2.x) < 0.02

    def test_legacy_off_by_magnification(self, wide_grid):
        one, two = self.frames(wide_grid)
        l1 = normalize_legacy(one).total
        l2 = normalize_legacy(two).total
        assert l1.values.sum() == pytest.approx(1.0)
        resampled = np.interp(l2.x, l1.x, l1.values)
        bright = resampled > 0.2 * resampled.max()
        assert np.median(l2.values[bright] / resampled[bright]) == pytest.approx(2.0, rel=0.05)

    def test_channel_masses(self):
        channels = normalize_magnified(scale_counts(gaussian_image(), 1e6))
        assert channels.right.mass == pytest.approx(0.6)
        assert channels.left.mass == pytest.approx(0.4)
        assert channels.right.integral() == pytest.approx(1.0)

    def test_channel_consistency(self, wide_grid):
        field = propagate_analytic(SlitConfig(), 4.0, wide_grid)
        img = scale_counts(project_to_pixels(intensity(field), phase_gradient_slope(field), 26.0, 4.0, ZETA), 1e6)
        channels = normalize_magnified(img)
        np.testing.assert_allclose(channels.right.scaled() + channels.left.scaled(), channels.total.values,
                                   rtol=1e-12, atol=1e-15)

    def test_legacy_channels_sum_to_one_each(self):
        channels = normalize_legacy(scale_counts(gaussian_image(), 1e6))
        assert channels.right.values.sum() == pytest.approx(1.0)
        assert channels.left.values.sum() == pytest.approx(1.0)
        assert channels.right.mass == channels.left.mass == 1.0
        np.testing.assert_allclose(channels.right.scaled(), channels.left.scaled())

    def test_zero_frame(self):
        with pytest.raises(DegenerateInputError):
            normalize_magnified(gaussian_image(peak=0.0))
        with pytest.raises(DegenerateInputError):
            normalize_legacy(gaussian_image(peak=0.0))
