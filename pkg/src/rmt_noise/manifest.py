"""Resumable run state.

A run directory holds one manifest plus immutable chunk files, one per
completed batch of trials.  The manifest pins the command, config hash and
master seed; resuming verifies those and the sha256 of every completed chunk,
recomputes only what is missing, and never rewrites existing bytes.  Derived
artifacts (merged records, summaries, reports) are regenerated from chunks
and written only when their content would change.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field
from pathlib import Path

from .ensemble import atomic_write_text
from .errors import ResumeMismatchError, ValidationError

MANIFEST_VERSION = 1
MANIFEST_NAME = "manifest.json"
CHUNK_DIR = "chunks"


def _sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def write_if_changed(path: str | os.PathLike, text: str) -> bool:
    """Atomic write that leaves identical files untouched; True if written."""
    p = Path(path)
    if p.exists() and p.read_text(encoding="utf-8") == text:
        return False
    atomic_write_text(p, text)
    return True


@dataclass
class RunManifest:
    """Completion markers of one command's batches in one output directory."""

    root: Path
    command: str
    config_hash: str
    master_seed: int
    planned: tuple[str, ...]
    batches: dict[str, dict] = field(default_factory=dict)
    version: int = MANIFEST_VERSION

    @property
    def path(self) -> Path:
        return self.root / MANIFEST_NAME

    @property
    def chunk_root(self) -> Path:
        return self.root / CHUNK_DIR

    def save(self) -> None:
        obj = {
            "artifact": "run-manifest",
            "version": self.version,
            "command": self.command,
            "config": self.config_hash,
            "seed": self.master_seed,
            "planned": list(self.planned),
            "batches": {k: self.batches[k] for k in sorted(self.batches)},
        }
        atomic_write_text(self.path, json.dumps(obj, indent=2, sort_keys=True) + "\n")

    def pending(self) -> list[str]:
        return [k for k in self.planned if not self.verified_complete(k)]

    def complete(self) -> bool:
        return not self.pending()

    def verified_complete(self, key: str) -> bool:
        """A batch counts only if its chunk file still hashes as recorded."""
        entry = self.batches.get(key)
        if entry is None:
            return False
        chunk = self.root / entry["file"]
        if not chunk.exists():
            return False
        return _sha256_text(chunk.read_text(encoding="utf-8")) == entry["sha256"]

    def chunk_path(self, key: str) -> Path:
        entry = self.batches.get(key)
        if entry is None:
            raise ValidationError(f"batch {key!r} not recorded")
        return self.root / entry["file"]

    def record_chunk(self, key: str, filename: str, text: str, count: int) -> None:
        if key not in self.planned:
            raise ValidationError(f"batch {key!r} was not planned for this run")
        self.chunk_root.mkdir(parents=True, exist_ok=True)
        rel = os.path.join(CHUNK_DIR, filename)
        atomic_write_text(self.root / rel, text)
        self.batches[key] = {"file": rel, "sha256": _sha256_text(text), "records": count}
        self.save()


def create_or_resume(
    root: str | os.PathLike,
    command: str,
    config_hash: str,
    master_seed: int,
    planned: tuple[str, ...],
    resume: bool,
) -> RunManifest:
    """Open a run directory, enforcing the resume contract.

    A fresh directory always works.  An existing manifest must match the
    command, config hash and master seed exactly; continuing a partial run
    additionally requires ``resume`` (rerunning a finished one is always
    allowed and idempotent).
    """
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    path = root / MANIFEST_NAME
    if not path.exists():
        manifest = RunManifest(
            root=root, command=command, config_hash=config_hash,
            master_seed=master_seed, planned=tuple(planned),
        )
        manifest.save()
        return manifest
    obj = json.loads(path.read_text(encoding="utf-8"))
    if obj.get("artifact") != "run-manifest":
        raise ResumeMismatchError(f"{path}: not a run manifest")
    found = (obj.get("command"), obj.get("config"), obj.get("seed"), tuple(obj.get("planned", ())))
    wanted = (command, config_hash, master_seed, tuple(planned))
    if found != wanted:
        raise ResumeMismatchError(
            f"{path}: existing run does not match this invocation "
            f"(command/config/seed/plan {found!r} vs {wanted!r})"
        )
    manifest = RunManifest(
        root=root, command=command, config_hash=config_hash,
        master_seed=master_seed, planned=tuple(planned),
        batches=dict(obj.get("batches", {})), version=int(obj.get("version", 1)),
    )
    if manifest.pending() and not resume:
        raise ResumeMismatchError(
            f"{root}: partial run present ({len(manifest.pending())} of "
            f"{len(manifest.planned)} batches missing); pass --resume to continue"
        )
    return manifest
