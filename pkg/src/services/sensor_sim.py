"""
Sensor Simulation Service

CCD measurement chain for one plane: exact pixel integration of a density
split into right/left circular polarization by the weak coupling, Poisson
shot noise with background, background subtraction, and normalization of
the magnified frame (corrected) or of the raw counts (legacy).
"""

from typing import Optional

import numpy as np
import structlog
from scipy.integrate import trapezoid

from src.core.errors import ArgumentError, ConfigurationError, DegenerateInputError
from src.models.config import NoiseConfig
from src.models.physics import ChannelDensities, CouplingConstant, DensityCurve, KxkCurve, PixelImage
from src.services.interpolation import monotone_cubic
from src.services.quadrature import PiecewiseLinearDensity

logger = structlog.get_logger(__name__)

COVERAGE_THRESHOLD = 1e-6
RNG_NAME = "PCG64"


def pixel_centers(density: DensityCurve, spacing: float, n_pixels: Optional[int] = None) -> np.ndarray:
    """Centers of a pixel row symmetric about the grid center; fits the grid by default"""
    grid = density.grid
    if n_pixels is None:
        n_pixels = int(np.floor(grid.span / spacing + 1e-9))
    if n_pixels < 2:
        raise ConfigurationError(f"pixel spacing {spacing} mm leaves fewer than 2 pixels on the grid")
    middle = 0.5 * (grid.x_min + grid.x_max)
    return middle + (np.arange(n_pixels) - (n_pixels - 1) / 2) * spacing


def pixel_kxk(kxk: KxkCurve, centers: np.ndarray) -> np.ndarray:
    """k_x/|k| at pixel centers; masked field samples are skipped, 0 outside"""
    keep = ~kxk.mask
    return monotone_cubic(kxk.x_samples[keep], kxk.values[keep], centers, fill=0.0)


def project_to_pixels(
    density: DensityCurve,
    aux_kxk: KxkCurve,
    pitch: float,
    magnification: float,
    zeta: CouplingConstant,
    n_pixels: Optional[int] = None,
) -> PixelImage:
    """
    Expected right/left photon fractions per pixel, no noise.

    The pixel mass is the exact integral of the piecewise-linear density over
    the pixel's real extent; it is split as (1 +/- sin(zeta v)) / 2 with v the
    guidance ratio at the pixel center. Both channels together sum to the
    covered mass fraction.

    Args:
        density: Density at this plane
        aux_kxk: Guidance ratio on the same plane
        pitch: Pixel pitch in um
        magnification: Real mm per sensor mm
        zeta: Weak coupling
        n_pixels: Pixel count; defaults to as many as fit on the grid

    Raises:
        ConfigurationError: uncovered mass above 1e-6 or zeta*|v| >= pi/2
    """
    if pitch <= 0 or magnification <= 0:
        raise ArgumentError("pitch and magnification must be positive")
    spacing = pitch * 1e-3 * magnification
    centers = pixel_centers(density, spacing, n_pixels)
    edges = np.concatenate([centers - spacing / 2, [centers[-1] + spacing / 2]])

    pl = PiecewiseLinearDensity(density.x, density.values)
    cumulative = pl.mass_below(edges)
    mass = np.clip(np.diff(cumulative), 0.0, None) / pl.total_mass
    uncovered = 1.0 - float(mass.sum())
    if uncovered > COVERAGE_THRESHOLD:
        raise ConfigurationError(
            f"pixel row misses {uncovered:.3g} of the density mass at z={density.z}",
            {"uncovered": uncovered, "n_pixels": len(centers)},
        )

    v = pixel_kxk(aux_kxk, centers)
    phase = zeta.zeta * v
    if np.any(np.abs(phase) >= np.pi / 2):
        raise ConfigurationError(
            f"zeta={zeta.zeta} violates the arcsin branch at z={density.z}",
            {"max_zeta_v": float(np.max(np.abs(phase)))},
        )
    asym = np.sin(phase)
    return PixelImage(
        z=density.z, pitch_um=pitch, magnification=magnification, pixel_centers=centers,
        counts_R=mass * (1 + asym) / 2, counts_L=mass * (1 - asym) / 2,
        metadata={"zeta": zeta.zeta},
    )


def scale_counts(img: PixelImage, factor: float) -> PixelImage:
    """Multiply both channels by a common factor (expected counts for a photon budget)"""
    if factor <= 0:
        raise ArgumentError("scale factor must be positive")
    return img.replace(counts_R=img.counts_R * factor, counts_L=img.counts_L * factor)


def add_noise(img: PixelImage, noise: NoiseConfig, frame_index: int = 0) -> PixelImage:
    """
    Poisson counts with mean photon_budget * count + background_level.

    The generator is seeded with rng_seed XOR frame_index so every frame is
    reproducible on its own.
    """
    seed = noise.rng_seed ^ int(frame_index)
    rng = np.random.default_rng(seed)
    counts_R = rng.poisson(noise.photon_budget * img.counts_R + noise.background_level).astype(float)
    counts_L = rng.poisson(noise.photon_budget * img.counts_L + noise.background_level).astype(float)
    logger.debug("Noise drawn", z=img.z, seed=seed, total=float(counts_R.sum() + counts_L.sum()))
    return img.replace(
        counts_R=counts_R, counts_L=counts_L, rng=f"{RNG_NAME}:{seed}",
        metadata={**img.metadata, "photon_budget": noise.photon_budget,
                  "background_level": noise.background_level},
    )


def subtract_background(img: PixelImage, background_estimate: float) -> PixelImage:
    """Per-pixel max(count - estimate, 0) in both channels"""
    if background_estimate < 0:
        raise ArgumentError("background estimate must be non-negative")
    if background_estimate == 0:
        return img
    return img.replace(
        counts_R=np.maximum(img.counts_R - background_estimate, 0.0),
        counts_L=np.maximum(img.counts_L - background_estimate, 0.0),
    )


def _channel(z, grid, counts, norm, total_norm, label) -> DensityCurve:
    values = counts / norm if norm > 0 else np.zeros_like(counts)
    return DensityCurve(z=z, grid=grid, values=values, mass=float(norm / total_norm),
                        metadata={"normalization": label})


def normalize_magnified(img: PixelImage) -> ChannelDensities:
    """
    Densities per real mm: counts over their trapezoid integral on the
    magnified pixel centers.

    Each channel is unit-normalized and carries its share of the summed
    integral as ``mass``.

    Raises:
        DegenerateInputError: zero total counts
    """
    x = img.pixel_centers
    grid = img.grid()
    total = trapezoid(img.counts_total, x)
    if not total > 0:
        raise DegenerateInputError("frame has zero counts", {"z": img.z})
    return ChannelDensities(
        right=_channel(img.z, grid, img.counts_R, trapezoid(img.counts_R, x), total, "corrected"),
        left=_channel(img.z, grid, img.counts_L, trapezoid(img.counts_L, x), total, "corrected"),
        total=_channel(img.z, grid, img.counts_total, total, total, "corrected"),
    )


def normalize_legacy(img: PixelImage) -> ChannelDensities:
    """
    Each channel divided by its own count sum, without the pixel size.

    Values sum to one rather than integrate to one, so they are off by the
    pixel spacing in mm. Every channel carries unit mass, which drops the
    right/left balance of the frame.
    """
    total = float(img.counts_total.sum())
    if not total > 0:
        raise DegenerateInputError("frame has zero counts", {"z": img.z})
    grid = img.grid()

    def unit_sum(counts: np.ndarray) -> DensityCurve:
        own = float(counts.sum())
        return _channel(img.z, grid, counts, own, own if own > 0 else 1.0, "legacy")

    return ChannelDensities(right=unit_sum(img.counts_R), left=unit_sum(img.counts_L),
                            total=unit_sum(img.counts_total))
