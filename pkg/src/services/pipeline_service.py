"""
Pipeline Service

Runs the stages behind the CLI subcommands against one output directory:
synthesize frames and ground truth, reconstruct under a pipeline mode,
generate reference Bohm ensembles, compare ensembles and summarize reports.
Per-plane work is spread over a thread pool bounded by ``jobs``.
"""

import re
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Callable, Optional, Sequence, TypeVar

import structlog
from tqdm import tqdm

from src.core.config import get_settings
from src.core.errors import ArgumentError, ArtifactIOError, WeakTrajError
from src.core.manifest import ManifestRecorder, config_hash
from src.models.config import PipelineMode, RunConfig
from src.models.physics import CouplingConstant, DensityCurve, FieldSlice, PixelImage, TrajectoryEnsemble
from src.models.report import CongregationStatistic, ComparisonReport
from src.services.bohm import (
    cdf_transport_trajectories,
    cvt_trajectories,
    phase_trajectories,
    seed_quantiles,
    slope_transport_trajectories,
)
from src.services.metrics import compare_ensembles
from src.services.plotting import render_histogram_csv, render_overlay_csv, render_overlay_svg
from src.services.reconstruction import PlaneMeasurement, measure_plane, reconstruct_ensemble
from src.services.sensor_sim import add_noise, project_to_pixels, scale_counts
from src.services.wavefield import intensity, phase_gradient_slope, propagate_analytic
from src.storage import csv_io
from src.storage.storage import ArtifactStore

logger = structlog.get_logger(__name__)

T = TypeVar("T")
R = TypeVar("R")

FRAMES_DIR = "frames"
FIELDS_DIR = "fields"
TRUTH_ENSEMBLE = "bohm_truth.csv"
COMPARE_DIR = "compare"
SUMMARY_NAME = "summary.csv"


def frame_name(index: int) -> str:
    return f"{FRAMES_DIR}/frame_{index:03d}.csv"


def field_name(index: int) -> str:
    return f"{FIELDS_DIR}/field_{index:03d}.csv"


def mode_slug(mode: PipelineMode) -> str:
    """Directory-safe name of a pipeline mode"""
    return re.sub(r"[^A-Za-z0-9]+", "-", mode.label()).strip("-")


class PipelineService:
    """
    Stage runner bound to one run configuration and output directory.

    The output directory is, in order: the explicit argument, WEAKTRAJ_OUT,
    ``output_dir`` of the configuration.
    """

    def __init__(self, cfg: RunConfig, jobs: Optional[int] = None, force: bool = False,
                 output_dir: Optional[str] = None):
        settings = get_settings()
        self.cfg = cfg
        self.jobs = jobs or settings.DEFAULT_JOBS
        self.force = force
        self.progress = settings.PROGRESS
        self.output_dir = output_dir or settings.OUT or cfg.output_dir
        self.store = ArtifactStore(self.output_dir)
        self.hash = config_hash(cfg)
        self.recorder = ManifestRecorder(self.store, self.hash)
        self.zeta = CouplingConstant(cfg.zeta)

    def _map(self, fn: Callable[[T], R], items: Sequence[T], desc: str) -> list[R]:
        """Order-preserving map over a bounded thread pool"""
        if self.jobs <= 1:
            iterator = map(fn, items)
            return list(tqdm(iterator, total=len(items), desc=desc, disable=not self.progress))
        with ThreadPoolExecutor(max_workers=self.jobs) as pool:
            iterator = pool.map(fn, items)
            return list(tqdm(iterator, total=len(items), desc=desc, disable=not self.progress))

    def _stage(self, name: str, body: Callable[[], dict], mode: Optional[str] = None) -> dict:
        record = self.recorder.start(name, mode)
        try:
            details = body()
        except WeakTrajError as e:
            self.recorder.fail(record, e)
            raise
        self.recorder.complete(record, details)
        return details

    # Ground truth

    def truth_densities(self) -> list[DensityCurve]:
        """Noiseless densities from the closed-form propagator on every plane"""
        return self._map(lambda z: intensity(propagate_analytic(self.cfg.slit, z, self.cfg.grid)),
                         self.cfg.z_schedule, "densities")

    def truth_final_density(self) -> DensityCurve:
        return intensity(propagate_analytic(self.cfg.slit, self.cfg.z_schedule[-1], self.cfg.grid))

    def _synthesize_plane(self, index: int) -> tuple[FieldSlice, PixelImage]:
        cfg = self.cfg
        field = propagate_analytic(cfg.slit, cfg.z_schedule[index], cfg.grid)
        sensor = cfg.sensor
        img = project_to_pixels(
            intensity(field), phase_gradient_slope(field), sensor.pitch_um,
            sensor.magnification_at(index), self.zeta, sensor.n_pixels,
        )
        if sensor.noiseless:
            return field, scale_counts(img, sensor.noise.photon_budget)
        return field, add_noise(img, sensor.noise, frame_index=index)

    def synthesize(self) -> dict:
        """One frame and one source field per plane plus the CDF-transport ground truth"""

        def body() -> dict:
            n_planes = len(self.cfg.z_schedule)
            planes = self._map(self._synthesize_plane, list(range(n_planes)), "frames")
            names = []
            for index, (field, img) in enumerate(planes):
                csv_io.write_pixel_image(self.store, frame_name(index), img, self.hash, index)
                csv_io.write_field(self.store, field_name(index), field, self.hash)
                names += [frame_name(index), field_name(index)]

            densities = self.truth_densities()
            seeds = seed_quantiles(densities[0], self.cfg.n_trajectories)
            truth = cdf_transport_trajectories(densities, seeds)
            csv_io.write_ensemble(self.store, TRUTH_ENSEMBLE, truth, self.hash)
            self.recorder.add_files(names + [TRUTH_ENSEMBLE])
            logger.info("Synthesis written", planes=n_planes, output_dir=str(self.store.base_path))
            return {"planes": n_planes, "noiseless": self.cfg.sensor.noiseless,
                    "photon_budget": self.cfg.sensor.noise.photon_budget}

        return self._stage("synthesize", body)

    # Reconstruction

    def load_frames(self) -> list[PixelImage]:
        """
        Raises:
            ArtifactIOError: a frame is missing (names its z-index)
            ArtifactMismatchError: a frame comes from another configuration
        """
        frames = []
        for index, z in enumerate(self.cfg.z_schedule):
            name = frame_name(index)
            if not self.store.exists(name):
                raise ArtifactIOError(f"missing frame for z-index {index} (z={z} m): {self.store.path(name)}",
                                      {"z_index": index, "file": name})
            img, table = csv_io.read_pixel_image(self.store, name)
            csv_io.check_hash(table.config_hash, self.hash, name, self.force)
            frames.append(img)
        return frames

    def load_fields(self) -> list[FieldSlice]:
        """
        Source fields written by synthesize.

        Raises:
            ArtifactIOError: a field is missing (names its z-index)
            ArtifactMismatchError: a field comes from another configuration
        """
        fields = []
        for index, z in enumerate(self.cfg.z_schedule):
            name = field_name(index)
            if not self.store.exists(name):
                raise ArtifactIOError(f"missing field for z-index {index} (z={z} m): {self.store.path(name)}",
                                      {"z_index": index, "file": name})
            field, table = csv_io.read_field(self.store, name)
            csv_io.check_hash(table.config_hash, self.hash, name, self.force)
            fields.append(field)
        return fields

    def reconstruct(self, mode: Optional[PipelineMode] = None) -> dict:
        """
        Frames to slope curves to trajectories; compares against the ground
        truth when it is present.
        """
        mode = mode or self.cfg.mode
        slug = mode_slug(mode)
        prefix = f"recon_{slug}"

        def body() -> dict:
            frames = self.load_frames()
            background = self.cfg.sensor.effective_background
            planes: list[PlaneMeasurement] = self._map(
                lambda img: measure_plane(img, self.zeta, mode, background, self.cfg.eval_points),
                frames, "planes",
            )
            seeds = seed_quantiles(planes[0].density, self.cfg.n_trajectories)
            ensemble = reconstruct_ensemble([p.slope for p in planes], seeds, mode)
            measured_bohm = slope_transport_trajectories(
                [p.density for p in planes], seeds, mode.bohm_interp, mode.bohm_slope,
                photon_positions=ensemble,
            )

            names = [f"{prefix}/ensemble.csv", f"{prefix}/bohm_measured.csv"]
            csv_io.write_ensemble(self.store, names[0], ensemble, self.hash)
            csv_io.write_ensemble(self.store, names[1], measured_bohm, self.hash)
            for index, plane in enumerate(planes):
                slope_name = f"{prefix}/slope_{index:03d}.csv"
                density_name = f"{prefix}/density_{index:03d}.csv"
                csv_io.write_sampled_curve(self.store, slope_name, plane.slope, self.hash)
                csv_io.write_density(self.store, density_name, plane.density, self.hash)
                names += [slope_name, density_name]

            details = {
                "mode": mode.label(),
                "clamped": sum(p.diagnostics["clamped"] for p in planes),
                "masked": sum(p.diagnostics["masked"] for p in planes),
                "grazing": sum(p.diagnostics["grazing"] for p in planes),
                "truncated": ensemble.metadata["truncated"],
                "straight_steps": ensemble.metadata["straight_steps"],
                "seeds": [float(x) for x in seeds.positions],
            }
            if self.store.exists(TRUTH_ENSEMBLE):
                truth, table = csv_io.read_ensemble(self.store, TRUTH_ENSEMBLE)
                csv_io.check_hash(table.config_hash, self.hash, TRUTH_ENSEMBLE, self.force)
                report = self._report(ensemble, truth, self.truth_final_density(), CongregationStatistic.KS)
                csv_io.write_report(self.store, f"{prefix}/report.json", report)
                csv_io.write_pair_r(self.store, f"{prefix}/pair_r.csv", report, self.hash)
                names += [f"{prefix}/report.json", f"{prefix}/pair_r.csv"]
                details.update({"r_avg": report.r_avg, "congregation": report.congregation})
            self.recorder.add_files(names)
            return details

        return self._stage("reconstruct", body, mode.label())

    def _report(self, a: TrajectoryEnsemble, b: TrajectoryEnsemble, density: DensityCurve,
                statistic: CongregationStatistic) -> ComparisonReport:
        report = compare_ensembles(a, b, density, statistic)
        return report.model_copy(update={"config_hash": self.hash})

    # Reference ensembles

    def bohm(self, method: str = "cdf", integrator: str = "midpoint", metric: str = "probability") -> dict:
        """
        Reference ensemble from the configuration's own wavefield.

        The phase method integrates through the source fields written by
        synthesize when they exist, and propagates the slits otherwise.
        """
        name = f"bohm_{method}.csv"

        def body() -> dict:
            cfg = self.cfg
            if method == "phase":
                if self.store.exists(field_name(0)):
                    fields = self.load_fields()
                else:
                    fields = self._map(lambda z: propagate_analytic(cfg.slit, z, cfg.grid), cfg.z_schedule, "fields")
                seeds = seed_quantiles(intensity(fields[0]), cfg.n_trajectories)
                ensemble = phase_trajectories(fields, seeds, integrator=integrator)
            else:
                densities = self.truth_densities()
                if method == "cdf":
                    ensemble = cdf_transport_trajectories(densities, seed_quantiles(densities[0], cfg.n_trajectories))
                elif method == "cvt":
                    ensemble = cvt_trajectories(densities, cfg.n_trajectories, metric=metric)
                elif method == "slope":
                    seeds = seed_quantiles(densities[0], cfg.n_trajectories)
                    ensemble = slope_transport_trajectories(densities, seeds)
                else:
                    raise ArgumentError(f"unknown Bohm method '{method}'")
            csv_io.write_ensemble(self.store, name, ensemble, self.hash)
            self.recorder.add_files([name])
            return {"method": method, "file": name, "truncated": int(ensemble.truncated.sum())}

        return self._stage("bohm", body, method)

    # Comparison

    def _load_ensemble(self, path: str) -> TrajectoryEnsemble:
        store, name = self._locate(path)
        ensemble, table = csv_io.read_ensemble(store, name)
        csv_io.check_hash(table.config_hash, self.hash, str(store.path(name)), self.force)
        return ensemble

    def _locate(self, path: str) -> tuple[ArtifactStore, str]:
        """Artifact given relative to the output directory or as a filesystem path"""
        if self.store.exists(path):
            return self.store, path
        p = Path(path)
        if not p.exists():
            raise ArtifactIOError(f"artifact not found: {path}", {"file": path})
        return ArtifactStore(str(p.parent), create=False), p.name

    def compare(
        self,
        ensemble_a: str,
        ensemble_b: str,
        density: Optional[str] = None,
        statistic: CongregationStatistic = CongregationStatistic.KS,
        svg: bool = False,
    ) -> ComparisonReport:
        """
        Report plus overlay and histogram plot data for two ensembles.

        ``density`` defaults to the ground-truth density at the last plane.
        """

        def body() -> dict:
            a = self._load_ensemble(ensemble_a)
            b = self._load_ensemble(ensemble_b)
            if density is None:
                final_density = self.truth_final_density()
            else:
                store, name = self._locate(density)
                final_density, table = csv_io.read_density(store, name)
                csv_io.check_hash(table.config_hash, self.hash, name, self.force)

            report = self._report(a, b, final_density, statistic)
            label_a = a.metadata.get("mode") or a.metadata.get("method") or "a"
            label_b = b.metadata.get("mode") or b.metadata.get("method") or "b"
            if label_a == label_b:
                label_a, label_b = f"{label_a}:a", f"{label_b}:b"
            series = {label_a: a, label_b: b}

            names = [f"{COMPARE_DIR}/report.json", f"{COMPARE_DIR}/pair_r.csv",
                     f"{COMPARE_DIR}/overlay.csv", f"{COMPARE_DIR}/histogram.csv"]
            csv_io.write_report(self.store, names[0], report)
            csv_io.write_pair_r(self.store, names[1], report, self.hash)
            self.store.save_text(names[2], render_overlay_csv(series, self.hash))
            self.store.save_text(names[3], render_histogram_csv(series, final_density, self.hash))
            if svg:
                names.append(f"{COMPARE_DIR}/overlay.svg")
                self.store.save_text(names[-1], render_overlay_svg(b, a, final_density, (label_b, label_a)))
            self.recorder.add_files(names)
            result["report"] = report
            return {"r_avg": report.r_avg, "congregation": report.congregation,
                    "congregation_reference": report.congregation_reference, "series": [label_a, label_b]}

        result: dict = {}
        self._stage("compare", body)
        return result["report"]

    def report(self) -> list[dict]:
        """Collect every comparison report under the output directory into summary.csv"""
        rows = []
        for name in self.store.list("**/report.json"):
            report = csv_io.read_report(self.store, name)
            rows.append({
                "source": str(Path(name).parent),
                "mode": report.mode_a or "",
                "r_avg": report.r_avg,
                "congregation": report.congregation,
                "congregation_reference": report.congregation_reference,
                "pairs_skipped": report.counts.get("pairs_skipped", 0),
            })
        columns = ["source", "mode", "r_avg", "congregation", "congregation_reference", "pairs_skipped"]
        body = ([r["source"], r["mode"], csv_io.format_number(r["r_avg"]), csv_io.format_number(r["congregation"]),
                 csv_io.format_number(r["congregation_reference"]), str(r["pairs_skipped"])] for r in rows)
        self.store.save_text(SUMMARY_NAME, csv_io.render_csv({"config_hash": self.hash}, columns, body))
        logger.info("Summary written", reports=len(rows))
        return rows

    def run(self, mode: Optional[PipelineMode] = None, svg: bool = False) -> ComparisonReport:
        """synthesize, reconstruct and compare against the ground truth in one call"""
        mode = mode or self.cfg.mode
        self.synthesize()
        self.reconstruct(mode)
        return self.compare(f"recon_{mode_slug(mode)}/ensemble.csv", TRUTH_ENSEMBLE, svg=svg)
