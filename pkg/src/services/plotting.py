"""
Plot Data

Long-format overlay rows, final-position histogram rows and an optional
static SVG of the trajectory overlay.
"""

import io
from typing import Iterable, Mapping

import numpy as np
import structlog

from src.core.errors import ConfigurationError
from src.models.physics import DensityCurve, TrajectoryEnsemble
from src.storage.csv_io import format_number, render_csv

logger = structlog.get_logger(__name__)

OVERLAY_COLUMNS = ["series", "z_m", "x_mm"]
HISTOGRAM_COLUMNS = ["kind", "series", "x_mm", "value"]


def overlay_rows(ensembles: Mapping[str, TrajectoryEnsemble]) -> Iterable[list[str]]:
    """One row per finite (series, z, x) point, trajectory-major"""
    for label, ensemble in ensembles.items():
        for row in ensemble.positions:
            for z, x in zip(ensemble.z_levels, row):
                if np.isfinite(x):
                    yield [label, format_number(z), format_number(x)]


def histogram_rows(ensembles: Mapping[str, TrajectoryEnsemble], density: DensityCurve) -> Iterable[list[str]]:
    """
    Final-position rows (value = trajectory index) followed by density rows.
    """
    for label, ensemble in ensembles.items():
        for i, x in enumerate(ensemble.positions[:, -1]):
            if np.isfinite(x):
                yield ["final_position", label, format_number(x), str(i)]
    for x, v in zip(density.x, density.values):
        yield ["density", "density", format_number(x), format_number(v)]


def render_overlay_csv(ensembles: Mapping[str, TrajectoryEnsemble], cfg_hash: str) -> str:
    return render_csv({"config_hash": cfg_hash}, OVERLAY_COLUMNS, overlay_rows(ensembles))


def render_histogram_csv(ensembles: Mapping[str, TrajectoryEnsemble], density: DensityCurve, cfg_hash: str) -> str:
    return render_csv({"config_hash": cfg_hash, "z_m": density.z}, HISTOGRAM_COLUMNS,
                      histogram_rows(ensembles, density))


def render_overlay_svg(
    reference: TrajectoryEnsemble,
    recon: TrajectoryEnsemble,
    density: DensityCurve,
    labels: tuple[str, str] = ("bohm", "reconstructed"),
) -> str:
    """
    Reference trajectories as lines, reconstructed ones as dots, plus a
    panel of final positions against the final density.

    Raises:
        ConfigurationError: matplotlib is not installed
    """
    try:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError as e:
        raise ConfigurationError("--svg needs matplotlib (install the 'plot' extra)") from e

    matplotlib.rcParams["svg.hashsalt"] = "weaktraj"
    fig, (ax_traj, ax_final) = plt.subplots(1, 2, figsize=(11, 5), gridspec_kw={"width_ratios": [3, 1]})
    for row in reference.positions:
        ax_traj.plot(reference.z_levels, row, color="tab:blue", lw=0.6)
    for row in recon.positions:
        ax_traj.plot(recon.z_levels, row, ".", color="tab:red", ms=1.5)
    ax_traj.set_xlabel("z (m)")
    ax_traj.set_ylabel("x (mm)")
    ax_traj.set_title(f"{labels[0]} (lines) vs {labels[1]} (dots)")

    ax_final.plot(density.values, density.x, color="black", lw=0.8)
    scale = float(density.values.max())
    for ensemble, color, offset in ((reference, "tab:blue", 0.25), (recon, "tab:red", 0.5)):
        finals = ensemble.final_positions()
        ax_final.plot(np.full(len(finals), offset * scale), finals, "_", color=color)
    ax_final.set_xlabel("density (1/mm)")
    ax_final.set_title(f"z = {density.z:g} m")
    fig.tight_layout()

    buf = io.StringIO()
    fig.savefig(buf, format="svg", metadata={"Date": None})
    plt.close(fig)
    return buf.getvalue()
