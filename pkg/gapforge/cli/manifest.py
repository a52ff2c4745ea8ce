"""
Run manifest: configuration, seeds, timings and a SHA-256 inventory of outputs.
"""

import hashlib
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, Field

from gapforge import __version__
from gapforge.cli.io import write_json
import logging

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"


def sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with Path(path).open("rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


class OutputEntry(BaseModel):
    path: str
    sha256: str
    bytes: int


class RunManifest(BaseModel):
    command: str
    config: Dict[str, Any]
    version: str = __version__
    seeds: List[int] = Field(default_factory=list)
    threads: Optional[int] = None
    started: str = Field(default_factory=_now)
    finished: Optional[str] = None
    exit_code: Optional[int] = None
    outputs: List[OutputEntry] = Field(default_factory=list)
    metrics: Dict[str, Any] = Field(default_factory=dict)

    def add(self, path: Path, root: Path) -> None:
        path = Path(path)
        self.outputs.append(
            OutputEntry(path=str(path.relative_to(root)), sha256=sha256_file(path), bytes=path.stat().st_size)
        )

    def finish(self, root: Path, exit_code: int, metrics: Dict[str, Any]) -> Path:
        self.finished = _now()
        self.exit_code = exit_code
        self.metrics = metrics
        return write_json(Path(root) / MANIFEST_NAME, self.model_dump())

    def mismatches(self, root: Path) -> List[str]:
        """Outputs whose current content no longer matches the recorded hash"""
        bad = []
        for entry in self.outputs:
            p = Path(root) / entry.path
            if not p.exists() or sha256_file(p) != entry.sha256:
                bad.append(entry.path)
        return bad


def load_manifest(root: Path) -> RunManifest:
    return RunManifest.model_validate_json((Path(root) / MANIFEST_NAME).read_text())
