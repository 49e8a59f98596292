"""
Weak Momentum Service

Turns the right/left polarization intensities into the transverse momentum
ratio k_x/|k| through the weak coupling zeta, and k_x/|k| into the trajectory
slope dx/dz. Legacy modes keep the tangent inversion and the direct slope
update for A/B runs.
"""

import numpy as np
import structlog

from src.core.errors import ArgumentError
from src.models.config import MomentumMode, UpdateMode
from src.models.physics import CouplingConstant, DensityCurve, KxkCurve, SampledCurve, SlopeCurve

logger = structlog.get_logger(__name__)

LOW_INTENSITY_EPS = 1e-3
RATIO_CLAMP = 1e-12


def infer_kx_over_k(
    I_R: DensityCurve,
    I_L: DensityCurve,
    zeta: CouplingConstant,
    mode: MomentumMode = MomentumMode.CORRECTED,
    eps: float = LOW_INTENSITY_EPS,
    clamp: float = RATIO_CLAMP,
) -> KxkCurve:
    """
    Invert the polarization asymmetry r = (I_R - I_L) / (I_R + I_L).

    corrected: arcsin(r) / zeta. legacy_tan: tan(arcsin(r)) / zeta, the
    operation order of the shipped code. Channels enter on the summed scale
    (values * mass). Samples with I_R + I_L below eps of the frame peak are
    masked; ratios beyond 1 - clamp are clipped and flagged. Legacy values
    that reach |k_x/|k|| >= 1 are masked.

    Raises:
        ArgumentError: channels on different samples or planes
    """
    mode = MomentumMode(mode)
    if I_R.z != I_L.z or not np.array_equal(I_R.x, I_L.x):
        raise ArgumentError("I_R and I_L must share z and x samples")
    right = I_R.scaled()
    left = I_L.scaled()
    total = right + left
    peak = float(total.max())
    mask = ~(total > eps * peak) if peak > 0 else np.ones_like(total, dtype=bool)

    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(mask, 0.0, (right - left) / total)
    limit = 1.0 - clamp
    clamped = ~mask & (np.abs(ratio) > limit)
    ratio = np.clip(ratio, -limit, limit)

    angle = np.arcsin(ratio)
    if mode == MomentumMode.LEGACY_TAN:
        angle = np.tan(angle)
    values = angle / zeta.zeta

    overflow = ~mask & (np.abs(values) >= 1)
    mask |= overflow
    if clamped.any() or overflow.any():
        logger.warning("Asymmetry ratios clamped", z=I_R.z, clamped=int(clamped.sum()),
                       overflow=int(overflow.sum()), mode=mode.value)
    return KxkCurve(
        z=I_R.z, x_samples=I_R.x, values=values, mask=mask, clamped=clamped,
        metadata={"zeta": zeta.zeta, "mode": mode.value},
    )


def slope_from_kxk(kxk: SampledCurve, mode: UpdateMode = UpdateMode.CORRECTED) -> SlopeCurve:
    """
    dx/dz from k_x/|k|: v / sqrt(1 - v^2), or v itself in legacy_direct mode.

    Samples with |v| = 1 are masked and flagged as grazing.
    """
    mode = UpdateMode(mode)
    v = kxk.values
    grazing = ~kxk.mask & (np.abs(v) >= 1)
    mask = kxk.mask | grazing
    safe = np.where(mask, 0.0, v)
    slope = safe / np.sqrt(1 - safe**2) if mode == UpdateMode.CORRECTED else safe
    return SlopeCurve(
        z=kxk.z, x_samples=kxk.x_samples, values=slope, mask=mask, clamped=kxk.clamped,
        grazing=grazing, metadata={**kxk.metadata, "update": mode.value},
    )
