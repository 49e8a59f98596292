"""
Report and Manifest Models

Pydantic documents written next to the CSV artifacts: the ensemble
comparison report and the run manifest with its per-stage records.
"""

from datetime import datetime, timezone
from enum import Enum
from typing import Any, Optional

from pydantic import BaseModel, Field, field_validator

REFERENCE_R_AVG = {"spline": 0.53, "kde": 0.62}


class CongregationStatistic(str, Enum):
    """Distance between final positions and a density"""
    KS = "ks"
    L1_HISTOGRAM = "l1_histogram"


class ComparisonReport(BaseModel):
    """Reconstructed vs reference ensemble"""

    per_pair_r: list[Optional[float]]
    r_avg: Optional[float] = None
    congregation: Optional[float] = None
    congregation_reference: Optional[float] = None
    statistic: CongregationStatistic = CongregationStatistic.KS
    counts: dict[str, int] = Field(default_factory=dict)

    # Provenance
    mode_a: Optional[str] = None
    mode_b: Optional[str] = None
    config_hash: Optional[str] = None
    metadata: dict[str, Any] = Field(default_factory=dict)

    @field_validator("per_pair_r")
    @classmethod
    def check_range(cls, v: list[Optional[float]]) -> list[Optional[float]]:
        if any(r is not None and not -1.0 <= r <= 1.0 for r in v):
            raise ValueError("correlation coefficients must lie in [-1, 1]")
        return v

    @field_validator("congregation", "congregation_reference")
    @classmethod
    def check_unit_interval(cls, v: Optional[float]) -> Optional[float]:
        if v is not None and not 0.0 <= v <= 1.0:
            raise ValueError("congregation statistic must lie in [0, 1]")
        return v

    @property
    def congregation_delta(self) -> Optional[float]:
        if self.congregation is None or self.congregation_reference is None:
            return None
        return self.congregation - self.congregation_reference


class StageStatus(str, Enum):
    STARTED = "started"
    COMPLETED = "completed"
    FAILED = "failed"


class StageDiagnostics(BaseModel):
    """One pipeline stage as recorded in the manifest"""

    stage: str
    status: StageStatus = StageStatus.STARTED
    started_at: datetime = Field(default_factory=lambda: datetime.now(timezone.utc))
    finished_at: Optional[datetime] = None
    mode: Optional[str] = None
    details: dict[str, Any] = Field(default_factory=dict)
    error: Optional[str] = None

    @property
    def duration_s(self) -> Optional[float]:
        if self.finished_at is None:
            return None
        return (self.finished_at - self.started_at).total_seconds()


class RunManifest(BaseModel):
    """Provenance of everything in one output directory"""

    config_hash: str
    toolkit_version: str
    created_at: datetime = Field(default_factory=lambda: datetime.now(timezone.utc))
    stages: list[StageDiagnostics] = Field(default_factory=list)
    files: list[str] = Field(default_factory=list)
