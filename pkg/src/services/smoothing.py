"""
Smoothing Service

Continuous intensity curves from per-pixel counts: the weighted Gaussian
kernel estimator with Silverman's bandwidth, and the natural cubic spline
baseline.
"""

from typing import Optional

import numpy as np
import structlog
from scipy.integrate import trapezoid
from scipy.interpolate import CubicSpline

from src.core.errors import ArgumentError, DegenerateInputError
from src.models.config import Grid
from src.models.physics import Bandwidth, DensityCurve, WeightedSamples

logger = structlog.get_logger(__name__)

SILVERMAN_FACTOR = 1.06
SQRT_2PI = np.sqrt(2 * np.pi)


def effective_size(samples: WeightedSamples) -> float:
    """Kish's (sum w)^2 / sum w^2; the plain sum of weights for unit-frequency replicates"""
    w = samples.weights
    if samples.frequency:
        return float(w.sum())
    return float(w.sum() ** 2 / np.sum(w**2))


def weighted_std(samples: WeightedSamples) -> float:
    """Unbiased weighted standard deviation (ddof = 1 for unit weights)"""
    w = samples.weights
    x = samples.positions
    total = w.sum()
    mean = np.sum(w * x) / total
    ss = np.sum(w * (x - mean) ** 2)
    denom = total - 1 if samples.frequency else total - np.sum(w**2) / total
    if denom <= 0:
        raise DegenerateInputError("effective sample size must exceed 1", {"total_weight": float(total)})
    return float(np.sqrt(ss / denom))


def silverman_bandwidth(
    samples: WeightedSamples,
    floor: Optional[float] = None,
    ceiling: Optional[float] = None,
) -> Bandwidth:
    """
    h = 1.06 sigma n^(-1/5) with weighted sigma and effective n.

    Args:
        samples: Pixel centers (mm) weighted by counts or densities
        floor: Lower bound on h, e.g. a quarter of the real pixel spacing
        ceiling: Upper bound on h, e.g. one real pixel spacing

    Raises:
        ArgumentError: floor above ceiling
        DegenerateInputError: n <= 1 or zero spread
    """
    if floor is not None and ceiling is not None and floor > ceiling:
        raise ArgumentError(f"bandwidth floor {floor} exceeds ceiling {ceiling}")
    n = effective_size(samples)
    if n <= 1:
        raise DegenerateInputError(f"effective sample size {n:.3g} must exceed 1")
    sigma = weighted_std(samples)
    if not sigma > 0:
        raise DegenerateInputError("all weight sits at one position")
    h = SILVERMAN_FACTOR * sigma * n ** (-0.2)
    if floor is not None and h < floor:
        logger.debug("Bandwidth floored", h=h, floor=floor)
        h = floor
    if ceiling is not None and h > ceiling:
        logger.debug("Bandwidth capped", h=h, ceiling=ceiling)
        h = ceiling
    return Bandwidth(h=float(h))


def kde_raw(samples: WeightedSamples, h: Bandwidth, x: np.ndarray) -> np.ndarray:
    """(1 / (W h)) sum_i w_i K((x - x_i) / h) with the standard normal kernel"""
    x = np.asarray(x, dtype=float)
    u = (x[:, None] - samples.positions[None, :]) / h.h
    kernel = np.exp(-0.5 * u**2) / SQRT_2PI
    return kernel @ samples.weights / (samples.total_weight * h.h)


def kde_estimate(samples: WeightedSamples, h: Bandwidth, eval_grid: Grid, z: float = 0.0) -> DensityCurve:
    """
    Kernel estimate on ``eval_grid``, renormalized to unit trapezoid integral.

    The renormalization factor is kept in the curve metadata.
    """
    x = eval_grid.x
    raw = kde_raw(samples, h, x)
    area = trapezoid(raw, x)
    if not area > 0:
        raise DegenerateInputError("kernel estimate vanishes on the evaluation grid")
    return DensityCurve(
        z=z, grid=eval_grid, values=raw / area,
        metadata={"method": "kde", "h_mm": h.h, "renormalization": float(1 / area)},
    )


def spline_fit(samples: WeightedSamples, eval_grid: Grid, z: float = 0.0) -> DensityCurve:
    """
    Natural cubic spline through (position, weight), clamped at 0.

    Zero outside the sampled range, renormalized to unit integral.

    Raises:
        ArgumentError: fewer than 4 samples
        DegenerateInputError: nothing positive left after clamping
    """
    if len(samples.positions) < 4:
        raise ArgumentError("spline fit needs at least 4 samples")
    x = eval_grid.x
    spline = CubicSpline(samples.positions, samples.weights, bc_type="natural", extrapolate=False)
    values = np.nan_to_num(spline(x), nan=0.0)
    values = np.clip(values, 0.0, None)
    area = trapezoid(values, x)
    if not area > 0:
        raise DegenerateInputError("spline fit is non-positive everywhere")
    return DensityCurve(
        z=z, grid=eval_grid, values=values / area,
        metadata={"method": "spline", "renormalization": float(1 / area)},
    )
