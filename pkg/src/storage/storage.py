"""
Artifact storage on the local filesystem
"""
import os
import tempfile
from pathlib import Path

from src.core.errors import ArtifactIOError


class ArtifactStore:
    """Output directory holding the CSV and JSON artifacts of one run"""

    def __init__(self, base_path: str = "./runs/standard", create: bool = True):
        self.base_path = Path(base_path)
        if create:
            try:
                self.base_path.mkdir(parents=True, exist_ok=True)
            except OSError as e:
                raise ArtifactIOError(f"cannot create output directory {self.base_path}: {e}") from e
            if not os.access(self.base_path, os.W_OK):
                raise ArtifactIOError(f"output directory {self.base_path} is not writable")

    def path(self, name: str) -> Path:
        return self.base_path / name

    def exists(self, name: str) -> bool:
        return self.path(name).exists()

    def save_text(self, name: str, content: str) -> Path:
        """Write a file atomically: temp file in the same directory, then rename"""
        full_path = self.path(name)
        try:
            full_path.parent.mkdir(parents=True, exist_ok=True)
            fd, tmp = tempfile.mkstemp(dir=full_path.parent, prefix=f".{full_path.name}.", suffix=".tmp")
            with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as f:
                f.write(content)
            os.replace(tmp, full_path)
        except OSError as e:
            raise ArtifactIOError(f"cannot write {full_path}: {e}") from e
        return full_path

    def read_text(self, name: str) -> str:
        full_path = self.path(name)
        if not full_path.exists():
            raise ArtifactIOError(f"artifact not found: {full_path}", {"file": str(full_path)})
        try:
            return full_path.read_text(encoding="utf-8")
        except OSError as e:
            raise ArtifactIOError(f"cannot read {full_path}: {e}") from e

    def delete(self, name: str) -> bool:
        full_path = self.path(name)
        if full_path.exists():
            full_path.unlink()
            return True
        return False

    def list(self, pattern: str = "*") -> list[str]:
        """Sorted relative names matching a glob pattern"""
        return sorted(str(p.relative_to(self.base_path)) for p in self.base_path.glob(pattern) if p.is_file())
