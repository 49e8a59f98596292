"""
Run Configuration Models

Pydantic models for the JSON run configuration: transverse grid, slit
geometry, sensor chain, pipeline mode and the full RunConfig document.
All lengths are in mm except z (m) and wavelength (nm).
"""

import json
import math
from enum import Enum
from pathlib import Path
from typing import Literal, Optional, Union

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from src.core.errors import ArtifactIOError, ValidationFailure

SCHEMA_VERSION = 1
ZETA_REFERENCE = 373.5


class Grid(BaseModel):
    """Uniform transverse grid x_min..x_max (mm), endpoints included"""

    model_config = ConfigDict(frozen=True)

    x_min: float
    x_max: float
    n_points: int = Field(ge=2)

    @model_validator(mode="after")
    def check_ordering(self) -> "Grid":
        if not self.x_min < self.x_max:
            raise ValueError("x_min must be smaller than x_max")
        return self

    @property
    def x(self) -> np.ndarray:
        return np.linspace(self.x_min, self.x_max, self.n_points)

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / (self.n_points - 1)

    @property
    def span(self) -> float:
        return self.x_max - self.x_min

    @classmethod
    def from_samples(cls, x: np.ndarray) -> "Grid":
        """Build the grid matching uniformly spaced samples"""
        return cls(x_min=float(x[0]), x_max=float(x[-1]), n_points=int(len(x)))


class SlitConfig(BaseModel):
    """Two Gaussian slits at ±a with half-width sigma"""

    model_config = ConfigDict(frozen=True)

    slit_separation: float = Field(default=4.7, gt=0, description="center-to-center 2a (mm)")
    slit_sigma: float = Field(default=0.3, gt=0, description="Gaussian half-width (mm)")
    wavelength: float = Field(default=943.0, gt=0, description="nm")
    amplitude_ratio: float = Field(default=1.0, gt=0)
    relative_phase: float = 0.0
    n_slits: Literal[1, 2] = 2

    @model_validator(mode="after")
    def check_resolvable(self) -> "SlitConfig":
        if self.slit_separation <= 2 * self.slit_sigma:
            raise ValueError("slit_separation must exceed 2*slit_sigma")
        return self

    @property
    def half_separation(self) -> float:
        return self.slit_separation / 2

    @property
    def wavenumber(self) -> float:
        """k in mm^-1"""
        return 2 * math.pi / (self.wavelength * 1e-6)

    @property
    def rayleigh_range(self) -> float:
        """z_R = 2 k sigma^2 in mm"""
        return 2 * self.wavenumber * self.slit_sigma**2

    @classmethod
    def single_slit(cls, slit_sigma: float = 0.3, wavelength: float = 943.0) -> "SlitConfig":
        return cls(slit_sigma=slit_sigma, wavelength=wavelength, n_slits=1,
                   slit_separation=4 * slit_sigma + 1.0)


class NoiseConfig(BaseModel):
    """Shot noise and background of one CCD frame"""

    model_config = ConfigDict(frozen=True)

    photon_budget: float = Field(default=1e6, gt=0)
    background_level: float = Field(default=5.0, ge=0)
    rng_seed: int = Field(default=0, ge=0)


class SensorConfig(BaseModel):
    """Pixel geometry, per-plane magnification and noise"""

    model_config = ConfigDict(frozen=True)

    pitch_um: float = Field(default=26.0, gt=0)
    magnifications: list[float] = Field(default_factory=lambda: [4.0])
    n_pixels: Optional[int] = Field(default=None, ge=4)
    noise: NoiseConfig = Field(default_factory=NoiseConfig)
    noiseless: bool = False
    background_estimate: Optional[float] = Field(default=None, ge=0)

    @field_validator("magnifications", mode="before")
    @classmethod
    def parse_magnifications(cls, v):
        """Accept a single magnification for every plane"""
        if isinstance(v, (int, float)):
            return [float(v)]
        return v

    @field_validator("magnifications")
    @classmethod
    def check_magnifications(cls, v: list[float]) -> list[float]:
        if not v:
            raise ValueError("at least one magnification is required")
        if any(m <= 0 for m in v):
            raise ValueError("magnifications must be positive")
        return v

    def magnification_at(self, index: int) -> float:
        return self.magnifications[index] if len(self.magnifications) > 1 else self.magnifications[0]

    @property
    def effective_background(self) -> float:
        if self.noiseless:
            return 0.0
        if self.background_estimate is not None:
            return self.background_estimate
        return self.noise.background_level


class NormalizationMode(str, Enum):
    CORRECTED = "corrected"
    LEGACY = "legacy"


class MomentumMode(str, Enum):
    CORRECTED = "corrected"
    LEGACY_TAN = "legacy_tan"


class UpdateMode(str, Enum):
    CORRECTED = "corrected"
    LEGACY_DIRECT = "legacy_direct"


class SmoothingMethod(str, Enum):
    KDE = "kde"
    SPLINE = "spline"


class BohmInterpMode(str, Enum):
    CORRECTED_CDFXWISE = "corrected_cdfxWise"
    LEGACY_CDFX = "legacy_cdfx"


class BohmSlopeMode(str, Enum):
    CORRECTED = "corrected"
    LEGACY_TAN_ASIN = "legacy_tan_asin"


class PipelineMode(BaseModel):
    """Corrected or legacy choice for each stage of the reconstruction"""

    model_config = ConfigDict(frozen=True, use_enum_values=False)

    normalization: NormalizationMode = NormalizationMode.CORRECTED
    momentum: MomentumMode = MomentumMode.CORRECTED
    update: UpdateMode = UpdateMode.CORRECTED
    smoothing: SmoothingMethod = SmoothingMethod.KDE
    bohm_interp: BohmInterpMode = BohmInterpMode.CORRECTED_CDFXWISE
    bohm_slope: BohmSlopeMode = BohmSlopeMode.CORRECTED

    @classmethod
    def corrected(cls) -> "PipelineMode":
        return cls()

    @classmethod
    def legacy(cls) -> "PipelineMode":
        """The shipped pipeline: every legacy choice with spline smoothing"""
        return cls(
            normalization=NormalizationMode.LEGACY,
            momentum=MomentumMode.LEGACY_TAN,
            update=UpdateMode.LEGACY_DIRECT,
            smoothing=SmoothingMethod.SPLINE,
            bohm_interp=BohmInterpMode.LEGACY_CDFX,
            bohm_slope=BohmSlopeMode.LEGACY_TAN_ASIN,
        )

    @classmethod
    def parse(cls, text: str) -> "PipelineMode":
        """
        Parse a ``--mode`` value.

        Accepts ``corrected``, ``legacy`` or ``custom:key=value,...`` where
        unspecified keys keep their corrected value.
        """
        text = text.strip()
        if text == "corrected":
            return cls.corrected()
        if text == "legacy":
            return cls.legacy()
        if text.startswith("custom:"):
            fields: dict[str, str] = {}
            for item in filter(None, text[len("custom:"):].split(",")):
                key, sep, value = item.partition("=")
                if not sep:
                    raise ValidationFailure([f"mode: expected key=value, got '{item}'"])
                fields[key.strip()] = value.strip()
            unknown = sorted(set(fields) - set(cls.model_fields))
            if unknown:
                raise ValidationFailure([f"mode: unknown field '{k}'" for k in unknown])
            try:
                return cls(**fields)
            except ValidationError as e:
                raise ValidationFailure(_violations(e, prefix="mode")) from e
        raise ValidationFailure([f"mode: expected corrected|legacy|custom:..., got '{text}'"])

    def label(self) -> str:
        if self == PipelineMode.corrected():
            return "corrected"
        if self == PipelineMode.legacy():
            return "legacy"
        return "custom:" + ",".join(f"{k}={v.value}" for k, v in self)


class RunConfig(BaseModel):
    """Complete configuration of one synthetic run"""

    model_config = ConfigDict(frozen=True)

    schema_version: Literal[1] = SCHEMA_VERSION
    slit: SlitConfig = Field(default_factory=SlitConfig)
    grid: Grid = Field(default_factory=lambda: Grid(x_min=-16.0, x_max=16.0, n_points=4097))
    z_schedule: list[float] = Field(default_factory=lambda: [round(2.0 + 0.1 * i, 10) for i in range(41)])
    sensor: SensorConfig = Field(default_factory=SensorConfig)
    zeta: float = Field(default=ZETA_REFERENCE, gt=0)
    mode: PipelineMode = Field(default_factory=PipelineMode)
    n_trajectories: int = Field(default=80, ge=1)
    eval_points: int = Field(default=1025, ge=16)
    output_dir: str = "./runs/standard"

    @field_validator("z_schedule")
    @classmethod
    def check_schedule(cls, v: list[float]) -> list[float]:
        if len(v) < 2:
            raise ValueError("z_schedule needs at least 2 planes")
        if any(z < 0 for z in v):
            raise ValueError("z_schedule entries must be non-negative")
        if any(b <= a for a, b in zip(v, v[1:])):
            raise ValueError("z_schedule must be strictly increasing")
        return v

    @model_validator(mode="after")
    def check_magnification_count(self) -> "RunConfig":
        n_mag = len(self.sensor.magnifications)
        if n_mag not in (1, len(self.z_schedule)):
            raise ValueError(
                f"sensor.magnifications has {n_mag} entries for {len(self.z_schedule)} planes"
            )
        return self

    def with_overrides(self, **updates) -> "RunConfig":
        return self.model_validate({**self.model_dump(mode="json"), **updates})


def _violations(error: ValidationError, prefix: str = "") -> list[str]:
    out = []
    for item in error.errors():
        loc = ".".join(str(p) for p in item["loc"])
        if prefix:
            loc = f"{prefix}.{loc}" if loc else prefix
        out.append(f"{loc or '<root>'}: {item['msg']}")
    return out


def parse_run_config(raw: Union[dict, str]) -> RunConfig:
    """
    Validate a raw configuration.

    Raises:
        ValidationFailure: listing every violation found
    """
    try:
        if isinstance(raw, str):
            return RunConfig.model_validate_json(raw)
        return RunConfig.model_validate(raw)
    except ValidationError as e:
        raise ValidationFailure(_violations(e)) from e


def load_run_config(path: Union[str, Path]) -> RunConfig:
    """Load a JSON (or YAML) run configuration from disk"""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ArtifactIOError(f"cannot read config {path}: {e}") from e
    if path.suffix.lower() in (".yaml", ".yml"):
        raw = yaml.safe_load(text)
    else:
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as e:
            raise ValidationFailure([f"<root>: invalid JSON ({e})"]) from e
    if not isinstance(raw, dict):
        raise ValidationFailure(["<root>: configuration must be an object"])
    return parse_run_config(raw)
