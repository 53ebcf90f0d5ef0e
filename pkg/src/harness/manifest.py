"""Run manifest: one entry per (architecture, seed) with status and artifact paths.

The manifest lives at ``<output>/manifest.json`` and also keeps the simulation
diagnostics of each dataset split. Every status change is
written through ``write_json`` (temp file + rename), so an interrupted matrix
leaves a readable manifest and a restart retrains only unfinished entries.
"""

import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional

from src.core.errors import ArtifactError
from src.core.storage import PathLike, read_json, write_json

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"

PENDING = "pending"
TRAINED = "trained"
EVALUATED = "evaluated"
FAILED = "failed"
STATUSES = (PENDING, TRAINED, EVALUATED, FAILED)


def run_key(architecture: str, seed: int) -> str:
    return f"{architecture}/{seed}"


@dataclass
class RunEntry:
    architecture: str
    seed: int
    status: str = PENDING
    checkpoint: Optional[str] = None
    metrics: Optional[str] = None
    seconds: Optional[float] = None
    steps: int = 0
    error: Optional[Dict[str, Any]] = None

    def __post_init__(self):
        if self.status not in STATUSES:
            raise ValueError(f"Unknown run status '{self.status}'")

    @property
    def key(self) -> str:
        return run_key(self.architecture, self.seed)

    @property
    def trained(self) -> bool:
        return self.status in (TRAINED, EVALUATED)


@dataclass
class RunManifest:
    """Book of runs for one resolved config (identified by its hash)."""

    config_hash: str
    path: Path
    entries: Dict[str, RunEntry] = field(default_factory=dict)
    datasets: Dict[str, Dict[str, Any]] = field(default_factory=dict)

    @classmethod
    def open(cls, output_dir: PathLike, config_hash: str) -> "RunManifest":
        """Load the manifest in ``output_dir``; a different config hash starts a fresh one."""
        path = Path(output_dir) / MANIFEST_NAME
        if not path.exists():
            return cls(config_hash, path)
        payload = read_json(path, kind="manifest")
        if payload.get("config_hash") != config_hash:
            logger.warning("Config changed since the last run in %s; previous manifest entries are discarded",
                           output_dir)
            return cls(config_hash, path)
        entries = {key: RunEntry(**value) for key, value in payload.get("runs", {}).items()}
        return cls(config_hash, path, entries, payload.get("datasets", {}))

    @classmethod
    def load(cls, output_dir: PathLike) -> "RunManifest":
        """Load an existing manifest regardless of its hash.

        Raises:
            ArtifactError: If no manifest exists
        """
        path = Path(output_dir) / MANIFEST_NAME
        if not path.exists():
            raise ArtifactError("manifest", str(path))
        payload = read_json(path, kind="manifest")
        entries = {key: RunEntry(**value) for key, value in payload.get("runs", {}).items()}
        return cls(payload.get("config_hash", ""), path, entries, payload.get("datasets", {}))

    def entry(self, architecture: str, seed: int) -> RunEntry:
        key = run_key(architecture, seed)
        if key not in self.entries:
            self.entries[key] = RunEntry(architecture, seed)
        return self.entries[key]

    def get(self, architecture: str, seed: int) -> Optional[RunEntry]:
        return self.entries.get(run_key(architecture, seed))

    def update(self, architecture: str, seed: int, **changes: Any) -> RunEntry:
        """Apply ``changes`` to one entry and persist the whole manifest."""
        entry = self.entry(architecture, seed)
        for name, value in changes.items():
            if not hasattr(entry, name):
                raise AttributeError(f"RunEntry has no field '{name}'")
            setattr(entry, name, value)
        if entry.status not in STATUSES:
            raise ValueError(f"Unknown run status '{entry.status}'")
        self.save()
        return entry

    def record_dataset(self, split: str, diagnostics: Dict[str, Any]) -> None:
        """Store the simulation diagnostics of one dataset split and persist."""
        self.datasets[split] = dict(diagnostics)
        self.save()

    def with_status(self, *statuses: str) -> List[RunEntry]:
        return [e for _, e in sorted(self.entries.items()) if e.status in statuses]

    def save(self) -> Path:
        payload = {
            "config_hash": self.config_hash,
            "datasets": {split: self.datasets[split] for split in sorted(self.datasets)},
            "runs": {key: asdict(entry) for key, entry in sorted(self.entries.items())},
        }
        return write_json(self.path, payload)
