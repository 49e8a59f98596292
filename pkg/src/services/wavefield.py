"""
Wavefield Service

Two-slit Gaussian superposition and its paraxial propagation: the closed-form
propagator used for ground truth and an angular-spectrum propagator used to
cross-check it. Also provides the normalized density and the Bohm guidance
ratio k_x/|k| of a field.
"""

import numpy as np
import structlog
from scipy.integrate import trapezoid
from scipy.stats import norm

from src.core.errors import ArgumentError, ConfigurationError, DegenerateInputError, NumericalDomainError
from src.models.config import Grid, SlitConfig
from src.models.physics import DensityCurve, FieldSlice, KxkCurve

logger = structlog.get_logger(__name__)

TRUNCATION_THRESHOLD = 1e-6
BOUNDARY_MASS_THRESHOLD = 1e-8
NODE_FLOOR = 1e-12


def _humps(cfg: SlitConfig) -> list[tuple[float, complex]]:
    """(center, complex weight) of every slit term"""
    if cfg.n_slits == 1:
        return [(0.0, 1.0 + 0j)]
    a = cfg.half_separation
    return [(a, 1.0 + 0j), (-a, cfg.amplitude_ratio * np.exp(1j * cfg.relative_phase))]


def _check_truncation(cfg: SlitConfig, grid: Grid, width: float) -> None:
    """Mass of the incoherent hump sum falling outside the grid"""
    humps = _humps(cfg)
    total = sum(abs(w) ** 2 for _, w in humps)
    lost = 0.0
    for center, w in humps:
        tails = norm.cdf(grid.x_min, loc=center, scale=width) + norm.sf(grid.x_max, loc=center, scale=width)
        lost += abs(w) ** 2 / total * tails
    if lost > TRUNCATION_THRESHOLD:
        raise ConfigurationError(
            f"grid [{grid.x_min}, {grid.x_max}] mm truncates {lost:.3g} of the field mass",
            {"truncated_mass": float(lost), "threshold": TRUNCATION_THRESHOLD},
        )


def _superpose(cfg: SlitConfig, grid: Grid, q: complex) -> np.ndarray:
    """
    Sum of Gaussian terms with complex beam parameter q = 1 + i z/z_R.

    Each term is q^-1/2 exp(-(x - c)^2 / (4 sigma^2 q)), the paraxial
    solution started from exp(-(x - c)^2 / (4 sigma^2)).
    """
    x = grid.x
    four_s2q = 4 * cfg.slit_sigma**2 * q
    psi = np.zeros(grid.n_points, dtype=complex)
    for center, w in _humps(cfg):
        psi += w * q**-0.5 * np.exp(-((x - center) ** 2) / four_s2q)
    n = np.sqrt(trapezoid(np.abs(psi) ** 2, x))
    if not n > 0:
        raise DegenerateInputError("slit superposition vanishes on the grid")
    return psi / n


def make_two_slit_field(cfg: SlitConfig, grid: Grid) -> FieldSlice:
    """
    Field at the slits (z = 0), normalized to unit trapezoid norm.

    Raises:
        ConfigurationError: if the grid cuts off more than 1e-6 of the mass
    """
    _check_truncation(cfg, grid, cfg.slit_sigma)
    psi = _superpose(cfg, grid, 1.0 + 0j)
    logger.debug("Slit field built", n_slits=cfg.n_slits, n_points=grid.n_points)
    return FieldSlice(z=0.0, grid=grid, amplitude=psi, wavelength=cfg.wavelength)


def propagate_analytic(cfg: SlitConfig, z: float, grid: Grid) -> FieldSlice:
    """
    Closed-form paraxial field at distance z (m) on ``grid``.

    Args:
        cfg: Slit geometry and wavelength
        z: Propagation distance in meters, z >= 0
        grid: Evaluation grid; must hold the spread envelope

    Returns:
        FieldSlice normalized to unit norm; equals make_two_slit_field at z = 0
    """
    if z < 0:
        raise ArgumentError(f"z must be non-negative, got {z}")
    tau = z * 1e3 / cfg.rayleigh_range
    _check_truncation(cfg, grid, cfg.slit_sigma * np.sqrt(1 + tau**2))
    psi = _superpose(cfg, grid, 1.0 + 1j * tau)
    return FieldSlice(z=float(z), grid=grid, amplitude=psi, wavelength=cfg.wavelength)


def _boundary_fraction(field_values: np.ndarray, x: np.ndarray) -> float:
    density = np.abs(field_values) ** 2
    band = max(2, len(x) // 100)
    total = trapezoid(density, x)
    edges = trapezoid(density[:band], x[:band]) + trapezoid(density[-band:], x[-band:])
    return float(edges / total) if total > 0 else 0.0


def propagate_spectral(field: FieldSlice, dz: float) -> FieldSlice:
    """
    Angular-spectrum step over dz (m).

    The transform is multiplied by exp(-i k_x^2 dz / (2k)) with k_x from the
    FFT frequencies of the grid.

    Raises:
        NumericalDomainError: when the result wraps around the grid edges
    """
    if dz < 0:
        raise ArgumentError(f"dz must be non-negative, got {dz}")
    grid = field.grid
    kx = 2 * np.pi * np.fft.fftfreq(grid.n_points, d=grid.dx)
    kernel = np.exp(-1j * kx**2 * (dz * 1e3) / (2 * field.wavenumber))
    psi = np.fft.ifft(np.fft.fft(field.amplitude) * kernel)

    edge = _boundary_fraction(psi, grid.x)
    if edge > BOUNDARY_MASS_THRESHOLD:
        raise NumericalDomainError(
            f"spectral step of {dz} m reaches the grid boundary (edge mass {edge:.3g})",
            {"edge_mass": edge, "threshold": BOUNDARY_MASS_THRESHOLD, "z": field.z + dz},
        )
    return FieldSlice(z=field.z + dz, grid=grid, amplitude=psi, wavelength=field.wavelength)


def intensity(field: FieldSlice) -> DensityCurve:
    """|psi|^2 renormalized to unit integral"""
    rho = np.abs(field.amplitude) ** 2
    total = trapezoid(rho, field.x)
    if not total > 0:
        raise DegenerateInputError("field is identically zero", {"z": field.z})
    return DensityCurve(z=field.z, grid=field.grid, values=rho / total)


def phase_gradient_slope(field: FieldSlice) -> KxkCurve:
    """
    Guidance ratio k_x/|k| = (1/k) d(phase)/dx of a field.

    Uses Im(conj(psi) psi') / |psi|^2 with second-order central differences
    (one-sided second-order at the ends). Samples below 1e-12 of the peak
    density are masked.
    """
    psi = field.amplitude
    rho = np.abs(psi) ** 2
    dpsi = np.gradient(psi, field.grid.dx, edge_order=2)
    mask = rho < NODE_FLOOR * rho.max()
    with np.errstate(divide="ignore", invalid="ignore"):
        v = np.imag(np.conj(psi) * dpsi) / rho / field.wavenumber
    mask |= ~np.isfinite(v)
    mask |= np.abs(np.where(mask, 0.0, v)) >= 1
    if mask.any():
        logger.debug("Masked field nodes", z=field.z, masked=int(mask.sum()))
    return KxkCurve(
        z=field.z, x_samples=field.x, values=np.where(mask, np.nan, v), mask=mask,
        metadata={"source": "phase_gradient"},
    )
