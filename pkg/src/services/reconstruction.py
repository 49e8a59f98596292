"""
Reconstruction Service

Average photon trajectories from measured frames: each frame is reduced to
a slope curve (background, normalization, smoothing, weak-momentum
inversion, slope conversion) and seeds are stepped through the slope curves
with explicit Euler steps.
"""

from dataclasses import dataclass, field
from typing import Any, Optional, Sequence, Union

import numpy as np
import structlog

from src.core.errors import ArgumentError, DataError
from src.models.config import Grid, NormalizationMode, PipelineMode, SmoothingMethod
from src.models.physics import (
    Bandwidth,
    ChannelDensities,
    CouplingConstant,
    DensityCurve,
    KxkCurve,
    PixelImage,
    QuantileSeeds,
    SlopeCurve,
    TrajectoryEnsemble,
    WeightedSamples,
)
from src.services.interpolation import monotone_cubic
from src.services.sensor_sim import normalize_legacy, normalize_magnified, subtract_background
from src.services.smoothing import kde_estimate, silverman_bandwidth, spline_fit
from src.services.weak_momentum import infer_kx_over_k, slope_from_kxk

logger = structlog.get_logger(__name__)

MIN_SLOPE_SAMPLES = 4
BANDWIDTH_CEILING_PIXELS = 1.0


def interpolate_slope(slope: SlopeCurve, x: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
    """
    Monotone cubic interpolation of the unmasked slope samples, 0 outside them.

    Raises:
        DataError: fewer than 4 unmasked samples
    """
    keep = ~slope.mask
    if np.count_nonzero(keep) < MIN_SLOPE_SAMPLES:
        raise DataError(
            f"slope curve at z={slope.z} has {int(np.count_nonzero(keep))} unmasked samples",
            {"z": slope.z, "required": MIN_SLOPE_SAMPLES},
        )
    out = monotone_cubic(slope.x_samples[keep], slope.values[keep], x, fill=0.0)
    return float(out) if np.ndim(x) == 0 else out


def advance(x: Union[float, np.ndarray], dz: float, slope_curve: SlopeCurve) -> Union[float, np.ndarray]:
    """x + dz * slope(x); dz in m, x in mm"""
    if not dz > 0:
        raise ArgumentError(f"dz must be positive, got {dz}")
    return x + dz * 1e3 * interpolate_slope(slope_curve, x)


def reconstruct_ensemble(
    slopes: Sequence[SlopeCurve],
    seeds: Union[QuantileSeeds, np.ndarray],
    mode: PipelineMode,
) -> TrajectoryEnsemble:
    """
    Euler-step every seed through the slope curves.

    Trajectories outside the unmasked window of a plane move straight (fill 0)
    and are counted; trajectories leaving the sampled range are truncated.

    Args:
        slopes: Slope curves on strictly increasing z
        seeds: Start positions at the first plane
        mode: Pipeline mode recorded in the ensemble metadata

    Returns:
        TrajectoryEnsemble with truncation flags and straight-step counts
    """
    if len(slopes) < 2:
        raise ArgumentError("need at least 2 slope planes")
    z = np.array([s.z for s in slopes], dtype=float)
    if np.any(np.diff(z) <= 0):
        raise ArgumentError("slope planes must be ordered by strictly increasing z")
    start = np.asarray(seeds.positions if isinstance(seeds, QuantileSeeds) else seeds, dtype=float)
    first = slopes[0].x_samples
    if np.any((start < first[0]) | (start > first[-1])):
        raise ArgumentError("seeds must lie within the first plane's samples")

    positions = np.full((len(start), len(z)), np.nan)
    positions[:, 0] = start
    alive = np.ones(len(start), dtype=bool)
    straight = np.zeros(len(start), dtype=int)

    for j in range(1, len(z)):
        curve = slopes[j - 1]
        idx = np.flatnonzero(alive)
        x = positions[idx, j - 1]
        window = curve.x_samples[~curve.mask]
        outside = (x < window[0]) | (x > window[-1]) if len(window) else np.ones_like(x, dtype=bool)
        straight[idx[outside]] += 1

        x_new = advance(x, z[j] - z[j - 1], curve)
        limits = slopes[j].x_samples
        inside = (x_new >= limits[0]) & (x_new <= limits[-1])
        positions[idx[inside], j] = x_new[inside]
        alive[idx[~inside]] = False
        if not inside.all():
            logger.warning("Reconstructed trajectories left the window", z=float(z[j]),
                           count=int((~inside).sum()))

    logger.info("Reconstruction done", n=len(start), planes=len(z), mode=mode.label(),
                truncated=int((~alive).sum()), straight_steps=int(straight.sum()))
    return TrajectoryEnsemble(
        z_levels=z, positions=positions, truncated=~alive,
        metadata={
            "method": "reconstruction",
            "mode": mode.label(),
            "truncated": int((~alive).sum()),
            "straight_steps": int(straight.sum()),
        },
    )


@dataclass(frozen=True)
class PlaneMeasurement:
    """Everything derived from one frame"""

    z: float
    channels: ChannelDensities
    density: DensityCurve
    kxk: KxkCurve
    slope: SlopeCurve
    diagnostics: dict[str, Any] = field(default_factory=dict)


def _smooth(
    samples: WeightedSamples, method: SmoothingMethod, grid: Grid, z: float, h: Optional[Bandwidth]
) -> DensityCurve:
    if method == SmoothingMethod.KDE:
        return kde_estimate(samples, h, grid, z=z)
    return spline_fit(samples, grid, z=z)


def _with_mass(curve: DensityCurve, mass: float) -> DensityCurve:
    return DensityCurve(z=curve.z, grid=curve.grid, values=curve.values, mass=mass, metadata=curve.metadata)


def measure_plane(
    img: PixelImage,
    zeta: CouplingConstant,
    mode: PipelineMode,
    background: float = 0.0,
    eval_points: int = 1025,
    bandwidth_ceiling_pixels: float = BANDWIDTH_CEILING_PIXELS,
) -> PlaneMeasurement:
    """
    Reduce one frame to its smoothed density, k_x/|k| and slope curves.

    The normalized channel densities are what gets smoothed; each smoothed
    channel then carries the mass the normalization gave it, so legacy
    frames enter the inversion with both channels at unit sum.

    All three curves share one kernel bandwidth: Silverman's rule with
    Kish's effective size on the summed channel, kept between a quarter of
    the real pixel spacing and ``bandwidth_ceiling_pixels`` spacings.
    """
    clean = subtract_background(img, background)
    if mode.normalization == NormalizationMode.CORRECTED:
        channels = normalize_magnified(clean)
    else:
        channels = normalize_legacy(clean)

    centers = clean.pixel_centers
    grid = Grid(x_min=float(centers[0]), x_max=float(centers[-1]), n_points=eval_points)

    def samples(curve: DensityCurve) -> WeightedSamples:
        return WeightedSamples(positions=centers, weights=curve.values)

    h = None
    if mode.smoothing == SmoothingMethod.KDE:
        h = silverman_bandwidth(samples(channels.total), floor=clean.spacing / 4,
                                ceiling=clean.spacing * bandwidth_ceiling_pixels)

    def smooth(curve: DensityCurve) -> DensityCurve:
        return _with_mass(_smooth(samples(curve), mode.smoothing, grid, img.z, h), curve.mass)

    right = smooth(channels.right)
    left = smooth(channels.left)
    total = smooth(channels.total)

    kxk = infer_kx_over_k(right, left, zeta, mode.momentum)
    slope = slope_from_kxk(kxk, mode.update)
    diagnostics = {
        "z": img.z,
        "clamped": int(np.count_nonzero(kxk.clamped)),
        "masked": int(np.count_nonzero(kxk.mask)),
        "grazing": int(np.count_nonzero(slope.grazing)),
        "h_mm": h.h if h is not None else None,
    }
    logger.debug("Plane measured", **diagnostics)
    return PlaneMeasurement(z=img.z, channels=channels, density=total, kxk=kxk, slope=slope,
                            diagnostics=diagnostics)
