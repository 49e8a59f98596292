"""
Numerical Data Models

Array-backed containers passed between the pipeline stages. Arrays are
stored as read-only numpy arrays; masked samples hold NaN and are flagged
in the boolean ``mask`` (True = excluded).
"""

from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np
from scipy.integrate import trapezoid

from src.core.errors import ArgumentError, DataError
from src.models.config import ZETA_REFERENCE, Grid


def _frozen(values, dtype=float) -> np.ndarray:
    arr = np.array(values, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class FieldSlice:
    """Complex transverse field psi(x) at distance z (m); wavelength in nm"""

    z: float
    grid: Grid
    amplitude: np.ndarray
    wavelength: float

    def __post_init__(self):
        if not self.wavelength > 0:
            raise ArgumentError("wavelength must be positive")
        amp = _frozen(self.amplitude, complex)
        if amp.shape != (self.grid.n_points,):
            raise ArgumentError(f"amplitude has shape {amp.shape}, grid has {self.grid.n_points} points")
        if not np.all(np.isfinite(amp)):
            raise DataError("field contains non-finite entries")
        object.__setattr__(self, "amplitude", amp)

    @property
    def x(self) -> np.ndarray:
        return self.grid.x

    @property
    def wavenumber(self) -> float:
        """k in mm^-1"""
        return 2 * np.pi / (self.wavelength * 1e-6)

    def norm(self) -> float:
        return float(trapezoid(np.abs(self.amplitude) ** 2, self.x))


@dataclass(frozen=True)
class DensityCurve:
    """
    Nonnegative density per mm sampled on a grid at distance z (m).

    ``mass`` is the share of the summed-channel total carried by this curve
    (1 for a total density); ``metadata`` ends up in the CSV header.
    """

    z: float
    grid: Grid
    values: np.ndarray
    mass: float = 1.0
    metadata: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        vals = _frozen(self.values)
        if vals.shape != (self.grid.n_points,):
            raise ArgumentError(f"values have shape {vals.shape}, grid has {self.grid.n_points} points")
        if not np.all(np.isfinite(vals)):
            raise DataError("density contains non-finite entries")
        if np.any(vals < 0):
            raise DataError("density has negative entries", {"min": float(vals.min())})
        object.__setattr__(self, "values", vals)

    @property
    def x(self) -> np.ndarray:
        return self.grid.x

    def integral(self) -> float:
        return float(trapezoid(self.values, self.x))

    def scaled(self) -> np.ndarray:
        """Values on the summed-channel scale"""
        return self.values * self.mass


@dataclass(frozen=True)
class SampledCurve:
    """Per-sample quantity with validity mask and clamp diagnostics"""

    z: float
    x_samples: np.ndarray
    values: np.ndarray
    mask: np.ndarray
    clamped: Optional[np.ndarray] = None
    metadata: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        x = _frozen(self.x_samples)
        vals = np.array(self.values, dtype=float, copy=True)
        mask = np.array(self.mask, dtype=bool, copy=True)
        clamped = (np.zeros_like(mask) if self.clamped is None
                   else np.array(self.clamped, dtype=bool, copy=True))
        if not (x.shape == vals.shape == mask.shape == clamped.shape) or x.ndim != 1:
            raise ArgumentError("x_samples, values, mask and clamped must be 1-D of equal length")
        if np.any(np.diff(x) <= 0):
            raise ArgumentError("x_samples must be strictly increasing")
        vals[mask] = np.nan
        if not np.all(np.isfinite(vals[~mask])):
            raise DataError("unmasked samples must be finite")
        for name, arr in (("values", vals), ("mask", mask), ("clamped", clamped)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "x_samples", x)

    @property
    def n_valid(self) -> int:
        return int(np.count_nonzero(~self.mask))


@dataclass(frozen=True)
class KxkCurve(SampledCurve):
    """Transverse momentum ratio k_x/|k| at each sample"""

    def __post_init__(self):
        super().__post_init__()
        valid = self.values[~self.mask]
        if np.any(np.abs(valid) >= 1):
            raise DataError("unmasked |k_x/|k|| must be < 1")


@dataclass(frozen=True)
class SlopeCurve(SampledCurve):
    """Trajectory slope dx/dz at each sample; ``grazing`` flags |k_x/|k|| = 1"""

    grazing: Optional[np.ndarray] = None

    def __post_init__(self):
        super().__post_init__()
        grazing = (np.zeros_like(self.mask) if self.grazing is None
                   else np.array(self.grazing, dtype=bool, copy=True))
        grazing.setflags(write=False)
        object.__setattr__(self, "grazing", grazing)


@dataclass(frozen=True)
class PixelImage:
    """
    One CCD frame: right/left circular polarization counts per pixel.

    ``pixel_centers`` are real transverse positions (mm) after magnification.
    """

    z: float
    pitch_um: float
    magnification: float
    pixel_centers: np.ndarray
    counts_R: np.ndarray
    counts_L: np.ndarray
    rng: Optional[str] = None
    metadata: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        centers = _frozen(self.pixel_centers)
        r = _frozen(self.counts_R)
        l = _frozen(self.counts_L)
        if not (centers.shape == r.shape == l.shape) or centers.ndim != 1:
            raise ArgumentError("pixel_centers and counts must be 1-D of equal length")
        if len(centers) < 2:
            raise ArgumentError("an image needs at least 2 pixels")
        steps = np.diff(centers)
        if np.any(steps <= 0) or not np.allclose(steps, self.spacing, rtol=1e-9, atol=0):
            raise ArgumentError("pixel_centers must be increasing with spacing pitch*magnification")
        if np.any(r < 0) or np.any(l < 0) or not (np.all(np.isfinite(r)) and np.all(np.isfinite(l))):
            raise DataError("counts must be finite and nonnegative")
        object.__setattr__(self, "pixel_centers", centers)
        object.__setattr__(self, "counts_R", r)
        object.__setattr__(self, "counts_L", l)

    @property
    def spacing(self) -> float:
        """Real pixel spacing in mm"""
        return self.pitch_um * 1e-3 * self.magnification

    @property
    def n_pixels(self) -> int:
        return len(self.pixel_centers)

    @property
    def counts_total(self) -> np.ndarray:
        return self.counts_R + self.counts_L

    def grid(self) -> Grid:
        return Grid.from_samples(self.pixel_centers)

    def replace(self, **changes) -> "PixelImage":
        data = {
            "z": self.z, "pitch_um": self.pitch_um, "magnification": self.magnification,
            "pixel_centers": self.pixel_centers, "counts_R": self.counts_R,
            "counts_L": self.counts_L, "rng": self.rng, "metadata": dict(self.metadata),
        }
        data.update(changes)
        return PixelImage(**data)


@dataclass(frozen=True)
class ChannelDensities:
    """Right, left and summed densities of one normalized frame"""

    right: DensityCurve
    left: DensityCurve
    total: DensityCurve


@dataclass(frozen=True)
class QuantileSeeds:
    """Initial trajectory positions at the first plane and their CDF levels"""

    quantiles: np.ndarray
    positions: np.ndarray

    def __post_init__(self):
        q = _frozen(self.quantiles)
        x = _frozen(self.positions)
        if q.shape != x.shape or q.ndim != 1 or len(q) == 0:
            raise ArgumentError("quantiles and positions must be non-empty 1-D arrays of equal length")
        if np.any((q <= 0) | (q >= 1)) or np.any(np.diff(q) <= 0):
            raise ArgumentError("quantiles must be strictly increasing inside (0, 1)")
        if np.any(np.diff(x) <= 0):
            raise ArgumentError("seed positions must be strictly increasing")
        object.__setattr__(self, "quantiles", q)
        object.__setattr__(self, "positions", x)

    def __len__(self) -> int:
        return len(self.positions)


@dataclass(frozen=True)
class TrajectoryEnsemble:
    """
    N trajectories over M shared z-levels (m); positions in mm.

    NaN entries are masked (a truncated trajectory is NaN from its exit
    plane on); ``truncated`` flags those rows.
    """

    z_levels: np.ndarray
    positions: np.ndarray
    truncated: Optional[np.ndarray] = None
    metadata: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        z = _frozen(self.z_levels)
        pos = _frozen(self.positions)
        if z.ndim != 1 or len(z) < 2:
            raise ArgumentError("an ensemble needs at least 2 z-levels")
        if np.any(np.diff(z) <= 0):
            raise ArgumentError("z_levels must be strictly increasing")
        if pos.ndim != 2 or pos.shape[1] != len(z):
            raise ArgumentError(f"positions shape {pos.shape} does not match {len(z)} z-levels")
        if np.any(np.isinf(pos)):
            raise DataError("trajectory positions must not be infinite")
        trunc = (np.zeros(pos.shape[0], dtype=bool) if self.truncated is None
                 else np.array(self.truncated, dtype=bool, copy=True))
        if trunc.shape != (pos.shape[0],):
            raise ArgumentError("truncated must have one flag per trajectory")
        trunc.setflags(write=False)
        object.__setattr__(self, "z_levels", z)
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "truncated", trunc)

    @property
    def n_trajectories(self) -> int:
        return self.positions.shape[0]

    @property
    def n_planes(self) -> int:
        return len(self.z_levels)

    def final_positions(self) -> np.ndarray:
        """Last finite position of every untruncated trajectory"""
        last = self.positions[:, -1]
        return last[np.isfinite(last)]

    def is_non_crossing(self) -> bool:
        """Rows stay strictly ordered in every column"""
        with np.errstate(invalid="ignore"):
            steps = np.diff(self.positions, axis=0)
        return bool(np.all(steps[np.isfinite(steps)] > 0))


@dataclass(frozen=True)
class WeightedSamples:
    """
    Pixel centers with nonnegative weights.

    Weights are reliability weights unless ``frequency`` is set, in which
    case each unit of weight is one replicate observation at that position.
    """

    positions: np.ndarray
    weights: np.ndarray
    frequency: bool = False

    def __post_init__(self):
        x = _frozen(self.positions)
        w = _frozen(self.weights)
        if x.shape != w.shape or x.ndim != 1:
            raise ArgumentError("positions and weights must be 1-D of equal length")
        if np.any(np.diff(x) <= 0):
            raise ArgumentError("positions must be strictly increasing")
        if not np.all(np.isfinite(w)) or np.any(w < 0):
            raise ArgumentError("weights must be finite and nonnegative")
        if w.sum() <= 0:
            raise ArgumentError("total weight must be positive")
        object.__setattr__(self, "positions", x)
        object.__setattr__(self, "weights", w)

    @property
    def total_weight(self) -> float:
        return float(self.weights.sum())


@dataclass(frozen=True)
class Bandwidth:
    """KDE bandwidth h (mm)"""

    h: float

    def __post_init__(self):
        if not self.h > 0:
            raise ArgumentError("bandwidth must be positive")


@dataclass(frozen=True)
class CouplingConstant:
    """Weak-measurement coupling zeta relating polarization asymmetry to k_x/|k|"""

    zeta: float = ZETA_REFERENCE

    def __post_init__(self):
        if not self.zeta > 0:
            raise ArgumentError("zeta must be positive")
