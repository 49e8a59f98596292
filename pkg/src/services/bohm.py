"""
Bohm Trajectory Service

Reference trajectories from three independent constructions:
probability-conserving CDF transport, integration of the phase-gradient
guidance law, and successive centroidal Voronoi tessellations. A fourth
generator steps trajectories through interpolated quantile slopes, with the
legacy interpolation and slope choices available for A/B runs.
"""

from dataclasses import dataclass, field
from typing import Literal, Optional, Sequence, Union

import numpy as np
import structlog
from scipy.linalg import solve_banded

from src.core.errors import ArgumentError, ConvergenceError, DataError, NumericalDomainError
from src.models.config import BohmInterpMode, BohmSlopeMode
from src.models.physics import DensityCurve, FieldSlice, QuantileSeeds, TrajectoryEnsemble
from src.services.interpolation import monotone_cubic
from src.services.quadrature import PiecewiseLinearDensity
from src.services.wavefield import phase_gradient_slope, propagate_spectral

logger = structlog.get_logger(__name__)

CVT_TOLERANCE = 1e-10
CVT_MAX_ITERATIONS = 10_000
INIT_TAIL = 1e-3


def seed_quantiles(density: DensityCurve, n: int) -> QuantileSeeds:
    """
    n seeds at the mid-quantiles (i - 0.5)/n of a density.

    Raises:
        ArgumentError: if n < 1
    """
    if n < 1:
        raise ArgumentError(f"need at least one seed, got n={n}")
    q = (np.arange(1, n + 1) - 0.5) / n
    positions = PiecewiseLinearDensity(density.x, density.values).inverse_cdf(q)
    return QuantileSeeds(quantiles=q, positions=positions)


def _z_levels(items: Sequence) -> np.ndarray:
    if len(items) < 2:
        raise ArgumentError("need at least 2 planes")
    z = np.array([item.z for item in items], dtype=float)
    if np.any(np.diff(z) <= 0):
        raise ArgumentError("planes must be ordered by strictly increasing z")
    return z


def _quantile_positions(densities: Sequence[DensityCurve], quantiles: np.ndarray) -> np.ndarray:
    """N x M positions keeping each quantile on every plane"""
    columns = []
    for d in densities:
        try:
            columns.append(PiecewiseLinearDensity(d.x, d.values).inverse_cdf(quantiles))
        except DataError as e:
            raise DataError(f"non-monotone CDF at z={d.z}: {e}", {"z": d.z}) from e
    return np.column_stack(columns)


def cdf_transport_trajectories(densities: Sequence[DensityCurve], seeds: QuantileSeeds) -> TrajectoryEnsemble:
    """
    Trajectories that keep their CDF level on every plane.

    Row i sits at CDF_j^{-1}(q_i) on plane j, which is the update evaluated
    at the Bohm ensemble's own positions.
    """
    z = _z_levels(densities)
    positions = _quantile_positions(densities, seeds.quantiles)
    logger.info("CDF transport done", n=len(seeds), planes=len(z))
    return TrajectoryEnsemble(z_levels=z, positions=positions, metadata={"method": "cdf_transport"})


def _field_slope(field_slice: FieldSlice, x: np.ndarray) -> np.ndarray:
    """dx/dz at x from the guidance ratio, monotone cubic over unmasked samples"""
    kxk = phase_gradient_slope(field_slice)
    keep = ~kxk.mask
    v = kxk.values[keep]
    return monotone_cubic(kxk.x_samples[keep], v / np.sqrt(1 - v**2), x, fill=0.0)


def phase_trajectories(
    fields: Sequence[FieldSlice],
    seeds: QuantileSeeds,
    integrator: Literal["midpoint", "euler"] = "midpoint",
) -> TrajectoryEnsemble:
    """
    Integrate dx/dz = v / sqrt(1 - v^2), v = k_x/|k|, through a field sequence.

    Midpoint takes its stage slope from the field propagated spectrally over
    half a step. Trajectories leaving the grid are truncated: NaN from the
    first plane outside on.

    Args:
        fields: Fields on strictly increasing z
        seeds: Start positions at the first plane
        integrator: "midpoint" (second order) or "euler"

    Returns:
        TrajectoryEnsemble with per-row truncation flags
    """
    if integrator not in ("midpoint", "euler"):
        raise ArgumentError(f"unknown integrator '{integrator}'")
    z = _z_levels(fields)
    n = len(seeds)
    positions = np.full((n, len(z)), np.nan)
    positions[:, 0] = seeds.positions
    alive = np.ones(n, dtype=bool)

    for j in range(1, len(z)):
        current = fields[j - 1]
        grid = current.grid
        dz_mm = (z[j] - z[j - 1]) * 1e3
        x = positions[alive, j - 1]

        slope = _field_slope(current, x)
        if np.any(np.abs(slope) * dz_mm >= grid.span / 10):
            raise ArgumentError(
                f"step {z[j - 1]} -> {z[j]} m too coarse for the slope field",
                {"max_step_mm": float(np.max(np.abs(slope)) * dz_mm)},
            )
        if integrator == "midpoint":
            stage = propagate_spectral(current, (z[j] - z[j - 1]) / 2)
            slope = _field_slope(stage, x + 0.5 * dz_mm * slope)
        x_new = x + dz_mm * slope

        inside = (x_new >= grid.x_min) & (x_new <= grid.x_max)
        idx = np.flatnonzero(alive)
        positions[idx[inside], j] = x_new[inside]
        if not inside.all():
            logger.warning("Trajectories left the grid", z=float(z[j]), count=int((~inside).sum()))
            alive[idx[~inside]] = False

    logger.info("Phase integration done", n=n, planes=len(z), integrator=integrator,
                truncated=int((~alive).sum()))
    return TrajectoryEnsemble(
        z_levels=z, positions=positions, truncated=~alive,
        metadata={"method": "phase", "integrator": integrator},
    )


@dataclass
class LloydDiagnostics:
    """Iteration record of one tessellation solve"""

    iterations: int = 0
    max_move: float = float("inf")
    energy_history: list[float] = field(default_factory=list)
    newton_rejected: int = 0


class LloydSolver:
    """
    One-dimensional Lloyd iteration for a piecewise-linear weight on [lo, hi].

    Cells are bounded by generator midpoints; each generator moves to the
    weighted centroid of its cell. With ``accelerate`` a Newton step on the
    fixed-point residual (tridiagonal Jacobian) is tried first and kept only
    when it preserves ordering and does not raise the energy.
    """

    def __init__(self, weight: PiecewiseLinearDensity, tol: float, max_iter: int, accelerate: bool):
        self.weight = weight
        self.lo = float(weight.x[0])
        self.hi = float(weight.x[-1])
        self.tol = tol
        self.max_iter = max_iter
        self.accelerate = accelerate

    def _boundaries(self, g: np.ndarray) -> np.ndarray:
        return np.concatenate([[self.lo], 0.5 * (g[1:] + g[:-1]), [self.hi]])

    def _cells(self, g: np.ndarray):
        b = self._boundaries(g)
        m0, m1, m2 = self.weight.moments_below(b)
        return b, np.diff(m0), np.diff(m1), np.diff(m2)

    def energy(self, g: np.ndarray) -> float:
        _, c0, c1, c2 = self._cells(g)
        y = g - self.weight.origin
        return float(np.sum(c2 - 2 * y * c1 + y**2 * c0))

    def centroids(self, g: np.ndarray) -> np.ndarray:
        _, c0, c1, _ = self._cells(g)
        with np.errstate(divide="ignore", invalid="ignore"):
            c = c1 / c0 + self.weight.origin
        return np.where(c0 > 0, c, g)

    def _newton(self, g: np.ndarray, c: np.ndarray) -> Optional[np.ndarray]:
        b, c0, _, _ = self._cells(g)
        n = len(g)
        if n < 2 or np.any(c0 <= 0):
            return None
        wb = np.interp(b, self.weight.x, self.weight.rho)
        d_right = wb[1:] * (b[1:] - c) / c0
        d_left = wb[:-1] * (c - b[:-1]) / c0
        d_right[-1] = 0.0
        d_left[0] = 0.0
        # banded (J - I): upper, main, lower diagonals
        ab = np.zeros((3, n))
        ab[0, 1:] = 0.5 * d_right[:-1]
        ab[1] = 0.5 * (d_left + d_right) - 1.0
        ab[2, :-1] = 0.5 * d_left[1:]
        try:
            step = solve_banded((1, 1), ab, -(c - g))
        except (ValueError, np.linalg.LinAlgError):
            return None
        candidate = g + step
        if not np.all(np.isfinite(candidate)) or np.any(np.diff(candidate) <= 0):
            return None
        if candidate[0] < self.lo or candidate[-1] > self.hi:
            return None
        return candidate

    def solve(self, g0: np.ndarray) -> tuple[np.ndarray, LloydDiagnostics]:
        g = np.array(g0, dtype=float)
        diag = LloydDiagnostics(energy_history=[self.energy(g)])
        tol = self.tol * (self.hi - self.lo)
        for it in range(1, self.max_iter + 1):
            c = self.centroids(g)
            nxt = c
            if self.accelerate:
                candidate = self._newton(g, c)
                if candidate is not None and self.energy(candidate) <= self.energy(c):
                    nxt = candidate
                else:
                    diag.newton_rejected += 1
            move = float(np.max(np.abs(nxt - g)))
            g = nxt
            diag.iterations = it
            diag.max_move = move
            diag.energy_history.append(self.energy(g))
            if move < tol:
                return g, diag
        raise ConvergenceError(
            f"Lloyd iteration did not converge in {self.max_iter} iterations",
            {"iterations": diag.iterations, "max_move": diag.max_move,
             "tolerance": tol, "energy": diag.energy_history[-1]},
        )


def cvt_trajectories(
    densities: Sequence[DensityCurve],
    n: int,
    metric: Literal["probability", "position"] = "probability",
    accelerate: Optional[bool] = None,
    weight_exponent: float = 1.0,
    tol: float = CVT_TOLERANCE,
    max_iter: int = CVT_MAX_ITERATIONS,
) -> TrajectoryEnsemble:
    """
    Trajectories from successive density-weighted 1D tessellations.

    Each plane is solved by Lloyd iteration, warm-started from the previous
    plane's generators. The first plane starts from evenly spaced positions
    between the 1e-3 and 1 - 1e-3 quantiles.

    ``probability`` iterates in u = CDF(x), where the pushed-forward weight
    is uniform on [0, 1], and maps back through the inverse CDF. The uniform
    tessellation of [0, 1] is fixed at u_i = (i - 1/2) / n, so this metric
    reproduces mid-quantile CDF transport up to the Lloyd tolerance.
    ``position`` iterates on x with weight density**weight_exponent; a 1D
    tessellation puts generators at a density proportional to the weight to
    the power 1/3, so ``weight_exponent=3`` follows the density itself.
    Per-plane diagnostics (iterations, last move, energies) go into the
    ensemble metadata.

    Raises:
        ArgumentError: n < 1 or unknown metric
        ConvergenceError: a plane needs more than ``max_iter`` iterations
    """
    if n < 1:
        raise ArgumentError(f"need at least one generator, got n={n}")
    if metric not in ("probability", "position"):
        raise ArgumentError(f"unknown metric '{metric}'")
    if accelerate is None:
        accelerate = metric == "probability"
    z = _z_levels(densities)

    positions = np.empty((n, len(z)))
    diagnostics = []
    previous: Optional[np.ndarray] = None
    for j, d in enumerate(densities):
        pl = PiecewiseLinearDensity(d.x, d.values)
        if previous is None:
            lo, hi = pl.inverse_cdf([INIT_TAIL, 1 - INIT_TAIL])
            previous = lo + (hi - lo) * (np.arange(n) + 0.5) / n

        if metric == "probability":
            solver = LloydSolver(PiecewiseLinearDensity([0.0, 1.0], [1.0, 1.0]), tol, max_iter, accelerate)
            start = pl.cdf(previous)
        else:
            weight = PiecewiseLinearDensity(d.x, d.values ** weight_exponent)
            solver = LloydSolver(weight, tol, max_iter, accelerate)
            start = np.clip(previous, d.grid.x_min, d.grid.x_max)

        try:
            g, diag = solver.solve(start)
        except ConvergenceError as e:
            e.details.update({"z": float(d.z), "plane": j})
            raise
        positions[:, j] = pl.inverse_cdf(g) if metric == "probability" else g
        previous = positions[:, j]
        diagnostics.append({
            "z": float(d.z), "iterations": diag.iterations, "max_move": diag.max_move,
            "energy_start": diag.energy_history[0], "energy_end": diag.energy_history[-1],
        })
        logger.debug("CVT plane solved", z=float(d.z), iterations=diag.iterations)

    logger.info("CVT trajectories done", n=n, planes=len(z), metric=metric,
                iterations=sum(item["iterations"] for item in diagnostics))
    return TrajectoryEnsemble(
        z_levels=z, positions=positions,
        metadata={"method": "cvt", "metric": metric, "planes": diagnostics},
    )


def slope_transport_trajectories(
    densities: Sequence[DensityCurve],
    seeds: QuantileSeeds,
    interp: BohmInterpMode = BohmInterpMode.CORRECTED_CDFXWISE,
    slope_mode: BohmSlopeMode = BohmSlopeMode.CORRECTED,
    photon_positions: Optional[Union[TrajectoryEnsemble, np.ndarray]] = None,
) -> TrajectoryEnsemble:
    """
    Bohm trajectories advanced by interpolated probability-conserving slopes.

    On each plane the reference set holds the positions of the seed
    quantiles; the slope there is (x_{j+1}(q) - x_j(q)) / dz. Every Bohm
    trajectory then advances by dz times the monotone-cubic interpolation
    (fill 0) of those slopes, evaluated at its own position
    (``corrected_cdfxWise``) or at the photon trajectory's position
    (``legacy_cdfx``). ``legacy_tan_asin`` passes the slope through
    tan(arcsin(.)) first. The corrected choices reproduce CDF transport.

    Args:
        densities: Densities on strictly increasing z
        seeds: Quantile seeds of the first plane
        interp: Where the reference slopes are evaluated
        slope_mode: Slope conversion applied to the reference slopes
        photon_positions: N x M photon positions, required for ``legacy_cdfx``
    """
    interp = BohmInterpMode(interp)
    slope_mode = BohmSlopeMode(slope_mode)
    z = _z_levels(densities)
    reference = _quantile_positions(densities, seeds.quantiles)

    photons = None
    if interp == BohmInterpMode.LEGACY_CDFX:
        if photon_positions is None:
            raise ArgumentError("legacy_cdfx interpolation needs photon trajectory positions")
        photons = (photon_positions.positions if isinstance(photon_positions, TrajectoryEnsemble)
                   else np.asarray(photon_positions, dtype=float))
        if photons.shape != reference.shape:
            raise ArgumentError(f"photon positions have shape {photons.shape}, expected {reference.shape}")

    positions = np.empty_like(reference)
    positions[:, 0] = seeds.positions
    for j in range(1, len(z)):
        dz_mm = (z[j] - z[j - 1]) * 1e3
        slope = (reference[:, j] - reference[:, j - 1]) / dz_mm
        if slope_mode == BohmSlopeMode.LEGACY_TAN_ASIN:
            if np.any(np.abs(slope) >= 1):
                raise NumericalDomainError("reference slope outside arcsin domain", {"z": float(z[j - 1])})
            slope = np.tan(np.arcsin(slope))
        where = positions[:, j - 1] if photons is None else photons[:, j - 1]
        positions[:, j] = positions[:, j - 1] + dz_mm * monotone_cubic(reference[:, j - 1], slope, where)

    logger.info("Slope transport done", n=len(seeds), planes=len(z),
                interp=interp.value, slope_mode=slope_mode.value)
    return TrajectoryEnsemble(
        z_levels=z, positions=positions,
        metadata={"method": "slope_transport", "bohm_interp": interp.value, "bohm_slope": slope_mode.value},
    )
