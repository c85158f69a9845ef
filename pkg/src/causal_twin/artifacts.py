"""Versioned, checksummed JSON containers for fitted artifacts."""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Mapping


class ArtifactError(ValueError):
    pass


def _digest(payload: Mapping) -> str:
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


def write_artifact(path: str | Path, fmt: str, version: int, payload: Mapping) -> None:
    doc = {"format": fmt, "version": version, "sha256": _digest(payload), "payload": payload}
    Path(path).write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n", encoding="utf-8")


def read_artifact(path: str | Path, fmt: str, version: int) -> dict:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if doc.get("format") != fmt:
        raise ArtifactError(f"{path}: not a {fmt} file")
    if doc.get("version") != version:
        raise ArtifactError(f"{path}: format version {doc.get('version')} is not supported "
                             f"(expected {version})")
    if _digest(doc["payload"]) != doc.get("sha256"):
        raise ArtifactError(f"{path}: checksum mismatch")
    return doc["payload"]
