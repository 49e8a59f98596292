"""
CSV and JSON codecs for pipeline artifacts.

Every CSV starts with ``# key=value`` header lines (always including
``config_hash``), then one column-name row, then data rows. Masked numbers
are written as empty cells.
"""

import csv
import io
import math
from dataclasses import dataclass
from typing import Any, Optional

import numpy as np
from pydantic import ValidationError

from src.core.config import get_settings
from src.core.errors import ArtifactMismatchError, SchemaError
from src.models.config import Grid
from src.models.physics import (
    DensityCurve,
    FieldSlice,
    KxkCurve,
    PixelImage,
    SampledCurve,
    SlopeCurve,
    TrajectoryEnsemble,
)
from src.models.report import ComparisonReport
from src.storage.storage import ArtifactStore

FIELD_COLUMNS = ["x_mm", "re", "im"]
DENSITY_COLUMNS = ["x_mm", "density"]
PIXEL_COLUMNS = ["pixel_index", "x_mm", "counts_R", "counts_L"]
CURVE_COLUMNS = ["x_mm", "value", "mask_flag", "clamp_flag"]
PAIR_COLUMNS = ["pair_index", "r"]


@dataclass
class CsvTable:
    """Parsed CSV artifact"""

    name: str
    header: dict[str, str]
    columns: list[str]
    rows: list[list[str]]

    @property
    def config_hash(self) -> Optional[str]:
        return self.header.get("config_hash")

    def require(self, key: str) -> str:
        if key not in self.header:
            raise SchemaError(f"{self.name}: missing header '{key}'", {"file": self.name, "header": key})
        return self.header[key]

    def header_float(self, key: str) -> float:
        return _to_float(self.require(key), self.name, key)

    def column(self, name: str, allow_empty: bool = False) -> np.ndarray:
        """Column as floats; empty cells are NaN when allowed"""
        if name not in self.columns:
            raise SchemaError(f"{self.name}: missing column '{name}'", {"file": self.name, "column": name})
        i = self.columns.index(name)
        out = np.empty(len(self.rows))
        for k, row in enumerate(self.rows):
            cell = row[i]
            if cell == "" and allow_empty:
                out[k] = np.nan
            else:
                out[k] = _to_float(cell, self.name, name)
        return out


def _to_float(cell: str, name: str, column: str) -> float:
    try:
        return float(cell)
    except ValueError as e:
        raise SchemaError(f"{name}: column '{column}' has non-numeric value '{cell}'",
                          {"file": name, "column": column}) from e


def format_number(value: Any) -> str:
    if value is None:
        return ""
    value = float(value)
    if math.isnan(value):
        return ""
    return get_settings().FLOAT_FORMAT % value


def _header_value(value: Any) -> str:
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, (float, np.floating)):
        return format_number(value)
    return str(value)


def render_csv(header: dict[str, Any], columns: list[str], rows) -> str:
    buf = io.StringIO()
    for key, value in header.items():
        if value is None or isinstance(value, (dict, list, tuple)):
            continue
        buf.write(f"# {key}={_header_value(value)}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    writer.writerows(rows)
    return buf.getvalue()


def parse_csv(text: str, name: str, expected_columns: Optional[list[str]] = None) -> CsvTable:
    """
    Split header lines from the table and check the column names.

    Raises:
        SchemaError: missing column row, unexpected columns or ragged rows
    """
    lines = text.splitlines()
    header: dict[str, str] = {}
    start = 0
    while start < len(lines) and lines[start].startswith("#"):
        key, sep, value = lines[start][1:].strip().partition("=")
        if sep:
            header[key.strip()] = value.strip()
        start += 1
    table = list(csv.reader(lines[start:]))
    if not table:
        raise SchemaError(f"{name}: no column row", {"file": name})
    columns, rows = table[0], [r for r in table[1:] if r]
    if expected_columns is not None and columns[: len(expected_columns)] != expected_columns:
        missing = next((c for c in expected_columns if c not in columns), expected_columns[0])
        raise SchemaError(f"{name}: expected columns {expected_columns}, found {columns}",
                          {"file": name, "column": missing})
    for k, row in enumerate(rows):
        if len(row) != len(columns):
            raise SchemaError(f"{name}: row {k + 1} has {len(row)} cells for {len(columns)} columns",
                              {"file": name, "row": k + 1})
    return CsvTable(name=name, header=header, columns=columns, rows=rows)


def check_hash(table_hash: Optional[str], expected: Optional[str], name: str, force: bool = False) -> None:
    """
    Raises:
        ArtifactMismatchError: hashes differ and ``force`` is off
    """
    if expected is None or force:
        return
    if table_hash != expected:
        raise ArtifactMismatchError(
            f"{name} was produced by configuration {table_hash}, expected {expected}; use --force to mix",
            {"file": name, "found": table_hash, "expected": expected},
        )


def _read(store: ArtifactStore, name: str, columns: list[str]) -> CsvTable:
    return parse_csv(store.read_text(name), str(store.path(name)), columns)


# Field


def write_field(store: ArtifactStore, name: str, field: FieldSlice, cfg_hash: str) -> None:
    rows = ([format_number(x), format_number(c.real), format_number(c.imag)]
            for x, c in zip(field.x, field.amplitude))
    header = {"z_m": field.z, "wavelength_nm": field.wavelength, "config_hash": cfg_hash}
    store.save_text(name, render_csv(header, FIELD_COLUMNS, rows))


def read_field(store: ArtifactStore, name: str) -> tuple[FieldSlice, CsvTable]:
    t = _read(store, name, FIELD_COLUMNS)
    x = t.column("x_mm")
    field = FieldSlice(z=t.header_float("z_m"), grid=Grid.from_samples(x),
                       amplitude=t.column("re") + 1j * t.column("im"),
                       wavelength=t.header_float("wavelength_nm"))
    return field, t


# Density


def write_density(store: ArtifactStore, name: str, density: DensityCurve, cfg_hash: str) -> None:
    rows = ([format_number(x), format_number(v)] for x, v in zip(density.x, density.values))
    header = {"z_m": density.z, "mass": density.mass, **density.metadata, "config_hash": cfg_hash}
    store.save_text(name, render_csv(header, DENSITY_COLUMNS, rows))


def read_density(store: ArtifactStore, name: str) -> tuple[DensityCurve, CsvTable]:
    t = _read(store, name, DENSITY_COLUMNS)
    x = t.column("x_mm")
    meta = {k: v for k, v in t.header.items() if k not in ("z_m", "mass", "config_hash")}
    density = DensityCurve(z=t.header_float("z_m"), grid=Grid.from_samples(x), values=t.column("density"),
                           mass=float(t.header.get("mass", 1.0)), metadata=meta)
    return density, t


# Pixel frames


def write_pixel_image(store: ArtifactStore, name: str, img: PixelImage, cfg_hash: str, z_index: int) -> None:
    rows = ([str(i), format_number(x), format_number(r), format_number(l)]
            for i, (x, r, l) in enumerate(zip(img.pixel_centers, img.counts_R, img.counts_L)))
    header = {
        "z_m": img.z, "z_index": z_index, "pitch_um": img.pitch_um, "magnification": img.magnification,
        "rng": img.rng or "none", **img.metadata, "config_hash": cfg_hash,
    }
    store.save_text(name, render_csv(header, PIXEL_COLUMNS, rows))


def read_pixel_image(store: ArtifactStore, name: str) -> tuple[PixelImage, CsvTable]:
    t = _read(store, name, PIXEL_COLUMNS)
    rng = t.header.get("rng")
    reserved = {"z_m", "z_index", "pitch_um", "magnification", "rng", "config_hash"}
    meta: dict[str, Any] = {}
    for key, value in t.header.items():
        if key not in reserved:
            try:
                meta[key] = float(value)
            except ValueError:
                meta[key] = value
    try:
        img = PixelImage(
            z=t.header_float("z_m"), pitch_um=t.header_float("pitch_um"),
            magnification=t.header_float("magnification"), pixel_centers=t.column("x_mm"),
            counts_R=t.column("counts_R"), counts_L=t.column("counts_L"),
            rng=None if rng in (None, "none") else rng, metadata=meta,
        )
    except ValueError as e:
        raise SchemaError(f"{t.name}: {e}", {"file": t.name}) from e
    return img, t


# k_x/|k| and slope curves


def write_sampled_curve(store: ArtifactStore, name: str, curve: SampledCurve, cfg_hash: str) -> None:
    kind = "slope" if isinstance(curve, SlopeCurve) else "kxk"
    rows = ([format_number(x), format_number(v), str(int(m)), str(int(c))]
            for x, v, m, c in zip(curve.x_samples, curve.values, curve.mask, curve.clamped))
    header = {"z_m": curve.z, "kind": kind, **curve.metadata, "config_hash": cfg_hash}
    store.save_text(name, render_csv(header, CURVE_COLUMNS, rows))


def read_sampled_curve(store: ArtifactStore, name: str) -> SampledCurve:
    t = _read(store, name, CURVE_COLUMNS)
    meta = {k: v for k, v in t.header.items() if k not in ("z_m", "kind", "config_hash")}
    kwargs = dict(
        z=t.header_float("z_m"), x_samples=t.column("x_mm"), values=t.column("value", allow_empty=True),
        mask=t.column("mask_flag").astype(bool), clamped=t.column("clamp_flag").astype(bool), metadata=meta,
    )
    return SlopeCurve(**kwargs) if t.header.get("kind") == "slope" else KxkCurve(**kwargs)


# Trajectory ensembles


def write_ensemble(store: ArtifactStore, name: str, ensemble: TrajectoryEnsemble, cfg_hash: str) -> None:
    columns = ["z_m"] + [f"x{i}_mm" for i in range(ensemble.n_trajectories)]
    rows = ([format_number(z)] + [format_number(x) for x in ensemble.positions[:, j]]
            for j, z in enumerate(ensemble.z_levels))
    header = {**ensemble.metadata, "n_trajectories": ensemble.n_trajectories, "config_hash": cfg_hash}
    store.save_text(name, render_csv(header, columns, rows))


def read_ensemble(store: ArtifactStore, name: str) -> tuple[TrajectoryEnsemble, CsvTable]:
    t = _read(store, name, ["z_m"])
    z = t.column("z_m")
    positions = np.vstack([t.column(c, allow_empty=True) for c in t.columns[1:]]) if len(t.columns) > 1 \
        else np.empty((0, len(z)))
    truncated = np.isnan(positions[:, -1]) if positions.size else None
    meta = {k: v for k, v in t.header.items() if k not in ("config_hash", "n_trajectories")}
    try:
        ensemble = TrajectoryEnsemble(z_levels=z, positions=positions, truncated=truncated, metadata=meta)
    except ValueError as e:
        raise SchemaError(f"{t.name}: {e}", {"file": t.name}) from e
    return ensemble, t


# Comparison reports


def write_pair_r(store: ArtifactStore, name: str, report: ComparisonReport, cfg_hash: Optional[str]) -> None:
    rows = ([str(i), format_number(r)] for i, r in enumerate(report.per_pair_r))
    store.save_text(name, render_csv({"config_hash": cfg_hash or "none"}, PAIR_COLUMNS, rows))


def write_report(store: ArtifactStore, name: str, report: ComparisonReport) -> None:
    store.save_text(name, report.model_dump_json(indent=2) + "\n")


def read_report(store: ArtifactStore, name: str) -> ComparisonReport:
    try:
        return ComparisonReport.model_validate_json(store.read_text(name))
    except ValidationError as e:
        raise SchemaError(f"{store.path(name)} is not a valid comparison report", {"file": name}) from e
