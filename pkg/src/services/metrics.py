"""
Metrics Service

Agreement between reconstructed and reference ensembles: per-pair Pearson
correlation of x(z) sequences and how closely final positions follow a
density.
"""

import math
from typing import Optional, Union

import numpy as np
import structlog
from scipy import stats

from src.core.errors import ArgumentError, UndefinedCorrelationError
from src.models.physics import DensityCurve, TrajectoryEnsemble
from src.models.report import REFERENCE_R_AVG, CongregationStatistic, ComparisonReport
from src.services.quadrature import PiecewiseLinearDensity

logger = structlog.get_logger(__name__)

MIN_COMMON_PLANES = 3
MIN_FINAL_POSITIONS = 10


def pearson_r(a: np.ndarray, b: np.ndarray) -> float:
    """
    Sample correlation over the planes where both rows are finite.

    Raises:
        ArgumentError: rows of different length
        UndefinedCorrelationError: fewer than 3 common planes or a constant row
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise ArgumentError("rows must be 1-D of equal length")
    common = np.isfinite(a) & np.isfinite(b)
    if np.count_nonzero(common) < MIN_COMMON_PLANES:
        raise UndefinedCorrelationError("fewer than 3 common planes", {"common": int(common.sum())})
    a, b = a[common], b[common]
    if np.all(a == a[0]) or np.all(b == b[0]):
        raise UndefinedCorrelationError("correlation with a constant sequence")
    r = stats.pearsonr(a, b).statistic
    return float(np.clip(r, -1.0, 1.0))


def _check_compatible(a: TrajectoryEnsemble, b: TrajectoryEnsemble) -> None:
    if a.n_trajectories != b.n_trajectories:
        raise ArgumentError(f"ensembles have {a.n_trajectories} and {b.n_trajectories} trajectories")
    if a.n_planes != b.n_planes or not np.allclose(a.z_levels, b.z_levels, rtol=1e-12, atol=0):
        raise ArgumentError("ensembles have different z-levels")


def ensemble_mean_r(recon: TrajectoryEnsemble, bohm: TrajectoryEnsemble) -> ComparisonReport:
    """
    Mean Pearson r over seed-index pairs; undefined pairs are skipped and counted.

    Reference averages from the measured dataset are stored in the report
    metadata for orientation only.
    """
    _check_compatible(recon, bohm)
    per_pair: list[Optional[float]] = []
    skipped = 0
    for row_a, row_b in zip(recon.positions, bohm.positions):
        try:
            per_pair.append(pearson_r(row_a, row_b))
        except UndefinedCorrelationError:
            per_pair.append(None)
            skipped += 1
    valid = [r for r in per_pair if r is not None]
    dropped = int(np.count_nonzero(~(np.isfinite(recon.positions) & np.isfinite(bohm.positions))))
    if skipped:
        logger.warning("Correlation pairs skipped", skipped=skipped, total=len(per_pair))
    return ComparisonReport(
        per_pair_r=per_pair,
        r_avg=float(np.mean(valid)) if valid else None,
        counts={"pairs": len(per_pair), "pairs_skipped": skipped, "masked_points_dropped": dropped},
        mode_a=recon.metadata.get("mode"),
        mode_b=bohm.metadata.get("mode", bohm.metadata.get("method")),
        metadata={"reference_r_avg": dict(REFERENCE_R_AVG)},
    )


def congregation_score(
    final_positions: np.ndarray,
    density: DensityCurve,
    statistic: Union[str, CongregationStatistic] = CongregationStatistic.KS,
) -> float:
    """
    Distance in [0, 1] between final positions and a density; 0 is perfect.

    ``ks``: Kolmogorov-Smirnov distance to the density's CDF.
    ``l1_histogram``: half the L1 distance between the fractions of positions
    in ceil(sqrt(n)) equal bins over the density grid (plus one bin for
    positions off the grid) and the density mass of those bins.
    """
    statistic = CongregationStatistic(statistic)
    x = np.asarray(final_positions, dtype=float)
    x = x[np.isfinite(x)]
    if len(x) < MIN_FINAL_POSITIONS:
        raise ArgumentError(f"need at least {MIN_FINAL_POSITIONS} final positions, got {len(x)}")
    pl = PiecewiseLinearDensity(density.x, density.values)

    if statistic == CongregationStatistic.KS:
        score = stats.kstest(x, pl.cdf).statistic
    else:
        n_bins = math.ceil(math.sqrt(len(x)))
        edges = np.linspace(density.grid.x_min, density.grid.x_max, n_bins + 1)
        counts, _ = np.histogram(x, bins=edges)
        observed = counts / len(x)
        expected = np.diff(pl.cdf(edges))
        off_grid = 1.0 - observed.sum()
        score = 0.5 * (np.abs(observed - expected).sum() + off_grid)
    return float(np.clip(score, 0.0, 1.0))


def compare_ensembles(
    recon: TrajectoryEnsemble,
    reference: TrajectoryEnsemble,
    density: DensityCurve,
    statistic: Union[str, CongregationStatistic] = CongregationStatistic.KS,
) -> ComparisonReport:
    """Correlation report plus congregation of both ensembles against the final density"""
    report = ensemble_mean_r(recon, reference)
    statistic = CongregationStatistic(statistic)
    congregation = congregation_score(recon.final_positions(), density, statistic)
    congregation_ref = congregation_score(reference.final_positions(), density, statistic)
    logger.info("Ensembles compared", r_avg=report.r_avg, congregation=congregation,
                congregation_reference=congregation_ref, statistic=statistic.value)
    return report.model_copy(update={
        "congregation": congregation,
        "congregation_reference": congregation_ref,
        "statistic": statistic,
    })
