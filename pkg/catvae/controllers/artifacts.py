import json
from pathlib import Path
from typing import Any, Dict

from loguru import logger
from pydantic import ValidationError

from catvae.core.errors import PersistenceError
from catvae.schemas.data import DatasetSchema


class ArtifactStore:
    """A run directory holding the schema sidecar, weight files and reports."""

    SCHEMA = "schema.json"
    MANIFEST = "manifest.json"
    MODEL = "model.cwv"
    PRIOR = "prior.cwv"
    BANK = "bank.cwv"
    TRAIN_REPORT = "train_report.json"
    TRACE = "trace.csv"

    def __init__(self, root: Path) -> None:
        self.root = Path(root)

    def path(self, name: str) -> Path:
        return self.root / name

    def ensure(self) -> "ArtifactStore":
        self.root.mkdir(parents=True, exist_ok=True)
        return self

    def save_schema(self, schema: DatasetSchema) -> None:
        self.ensure().path(self.SCHEMA).write_text(schema.model_dump_json(indent=2), encoding="utf-8")

    def load_schema(self) -> DatasetSchema:
        path = self.path(self.SCHEMA)
        if not path.is_file():
            raise PersistenceError(f"No schema sidecar in {self.root}")
        try:
            return DatasetSchema.model_validate_json(path.read_text(encoding="utf-8"))
        except ValidationError as exc:
            raise PersistenceError(f"Corrupt schema sidecar {path}: {exc}") from exc

    def save_json(self, name: str, payload: Dict[str, Any]) -> None:
        self.ensure().path(name).write_text(json.dumps(payload, indent=2, sort_keys=True), encoding="utf-8")

    def load_json(self, name: str) -> Dict[str, Any]:
        path = self.path(name)
        if not path.is_file():
            raise PersistenceError(f"Missing artifact {path}")
        try:
            return json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise PersistenceError(f"Corrupt artifact {path}: {exc}") from exc

    def write_text(self, name: str, text: str) -> Path:
        path = self.ensure().path(name)
        path.write_text(text, encoding="utf-8")
        logger.debug(f"Wrote {path}")
        return path


def resolve_bank_path(path: Path) -> Path:
    """Accept either a bank weight file or a directory that contains one."""
    path = Path(path)
    return path / ArtifactStore.BANK if path.is_dir() else path
