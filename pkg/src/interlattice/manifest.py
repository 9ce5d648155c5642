"""Content-hashed manifests for command outputs.

Every output directory carries one ``manifest.json`` listing each emitted
file with its sha256 digest and size. All writes go through a
:class:`ManifestWriter`, which serializes them behind a lock so workers can
hand results back from any thread. Readers look up the nearest manifest
above a file and refuse to use bytes whose digest no longer matches.
"""

from __future__ import annotations

import hashlib
import json
import threading
from pathlib import Path
from typing import Optional, Union

MANIFEST_NAME = "manifest.json"
MANIFEST_VERSION = 1
TOOL = "interlattice"

PathLike = Union[str, Path]


class IntegrityError(Exception):
    """A file's content does not match the digest its manifest recorded."""


def sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def canonical_json(doc) -> str:
    return json.dumps(doc, indent=1, sort_keys=True) + "\n"


def load_manifest(path: PathLike) -> dict:
    doc = json.loads(Path(path).read_text())
    if not isinstance(doc, dict) or doc.get("tool") != TOOL or "artifacts" not in doc:
        raise IntegrityError(f"{path} is not a {TOOL} manifest")
    return doc


class ManifestWriter:
    """Single writer for one output directory.

    Sections are keyed by name (usually the command), so rerunning a command
    replaces its own entry instead of appending history. With ``fresh`` any
    existing manifest is ignored; otherwise it is merged.
    """

    def __init__(self, root: PathLike, fresh: bool = False):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()
        self.artifacts: dict[str, dict] = {}
        self.sections: dict[str, dict] = {}
        existing = self.root / MANIFEST_NAME
        if existing.exists() and not fresh:
            doc = load_manifest(existing)
            self.artifacts = dict(doc["artifacts"])
            self.sections = dict(doc.get("sections", {}))

    def _rel(self, rel: PathLike) -> str:
        rel = Path(rel)
        if rel.is_absolute() or ".." in rel.parts:
            raise ValueError(f"artifact path must stay inside the output directory: {rel}")
        if rel.as_posix() == MANIFEST_NAME:
            raise ValueError("the manifest itself is not an artifact")
        return rel.as_posix()

    def write_bytes(self, rel: PathLike, data: bytes) -> Path:
        key = self._rel(rel)
        with self._lock:
            path = self.root / key
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_bytes(data)
            self.artifacts[key] = {"sha256": sha256_bytes(data), "bytes": len(data)}
        return path

    def write_text(self, rel: PathLike, text: str) -> Path:
        return self.write_bytes(rel, text.encode("utf-8"))

    def section(self, name: str, doc: dict) -> None:
        with self._lock:
            self.sections[name] = doc

    def close(self) -> Path:
        with self._lock:
            doc = {
                "tool": TOOL,
                "version": MANIFEST_VERSION,
                "sections": self.sections,
                "artifacts": dict(sorted(self.artifacts.items())),
            }
            path = self.root / MANIFEST_NAME
            path.write_text(canonical_json(doc))
        return path


class ManifestIndex:
    """Finds and caches the manifest governing each input file."""

    def __init__(self):
        self._cache: dict[Path, Optional[dict]] = {}

    def _manifest(self, directory: Path) -> Optional[dict]:
        if directory not in self._cache:
            candidate = directory / MANIFEST_NAME
            self._cache[directory] = load_manifest(candidate) if candidate.is_file() else None
        return self._cache[directory]

    def entry(self, path: PathLike) -> Optional[dict]:
        """The manifest record for ``path`` from the nearest manifest listing it."""
        path = Path(path).resolve()
        for directory in path.parents:
            doc = self._manifest(directory)
            if doc is None:
                continue
            rel = path.relative_to(directory).as_posix()
            if rel in doc["artifacts"]:
                return doc["artifacts"][rel]
        return None

    def read_bytes(self, path: PathLike) -> bytes:
        """Read ``path``, checking its digest when some manifest lists it.

        Files outside any manifest are user-supplied and read as-is.
        """
        data = Path(path).read_bytes()
        record = self.entry(path)
        if record is not None and record["sha256"] != sha256_bytes(data):
            raise IntegrityError(f"{path}: content hash does not match its manifest")
        return data
