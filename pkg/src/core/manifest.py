"""
Run Manifest

Configuration hashing and the per-directory manifest that records every
stage run against it.
"""

import json
from datetime import datetime, timezone
from typing import Any, Optional

import structlog
from cryptography.hazmat.backends import default_backend
from cryptography.hazmat.primitives import hashes
from pydantic import ValidationError

from src import __version__
from src.core.config import get_settings
from src.core.errors import SchemaError
from src.models.config import RunConfig
from src.models.report import RunManifest, StageDiagnostics, StageStatus
from src.storage.storage import ArtifactStore

logger = structlog.get_logger(__name__)

HASH_EXCLUDED_FIELDS = {"mode", "output_dir"}


def canonical_config_json(cfg: RunConfig) -> str:
    """Sorted, compact JSON of the fields that determine the dataset"""
    payload = cfg.model_dump(mode="json", exclude=HASH_EXCLUDED_FIELDS)
    return json.dumps(payload, sort_keys=True, separators=(",", ":"))


def config_hash(cfg: RunConfig) -> str:
    """
    SHA-256 of the canonical configuration.

    Returns:
        str: hex digest
    """
    digest = hashes.Hash(hashes.SHA256(), backend=default_backend())
    digest.update(canonical_config_json(cfg).encode("utf-8"))
    return digest.finalize().hex()


class ManifestRecorder:
    """
    Appends stage records to ``manifest.json`` of an output directory.

    An existing manifest with the same config hash is extended; one with a
    different hash is replaced.
    """

    def __init__(self, store: ArtifactStore, cfg_hash: str):
        self.store = store
        self.name = get_settings().MANIFEST_NAME
        self.manifest = self._load(cfg_hash) or RunManifest(config_hash=cfg_hash, toolkit_version=__version__)

    def _load(self, cfg_hash: str) -> Optional[RunManifest]:
        if not self.store.exists(self.name):
            return None
        try:
            existing = RunManifest.model_validate_json(self.store.read_text(self.name))
        except ValidationError as e:
            raise SchemaError(f"{self.store.path(self.name)} is not a valid manifest", {"errors": e.errors()}) from e
        return existing if existing.config_hash == cfg_hash else None

    def start(self, stage: str, mode: Optional[str] = None) -> StageDiagnostics:
        record = StageDiagnostics(stage=stage, mode=mode)
        self.manifest.stages.append(record)
        logger.info("stage_started", stage=stage, mode=mode, config_hash=self.manifest.config_hash[:12])
        return record

    def complete(self, record: StageDiagnostics, details: Optional[dict[str, Any]] = None) -> None:
        record.status = StageStatus.COMPLETED
        record.finished_at = datetime.now(timezone.utc)
        record.details.update(details or {})
        logger.info("stage_completed", stage=record.stage, duration_s=record.duration_s)
        self.write()

    def fail(self, record: StageDiagnostics, error: Exception) -> None:
        record.status = StageStatus.FAILED
        record.finished_at = datetime.now(timezone.utc)
        record.error = str(error)
        logger.error("stage_failed", stage=record.stage, error=str(error))
        self.write()

    def add_files(self, names: list[str]) -> None:
        self.manifest.files = sorted(set(self.manifest.files) | set(names))

    def write(self) -> None:
        self.store.save_text(self.name, self.manifest.model_dump_json(indent=2) + "\n")
