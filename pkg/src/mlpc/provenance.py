"""Machine-readable provenance for CLI artifacts.

Every command run attaches (or writes alongside) a block recording the tool
version, the subcommand, the effective flags, and SHA-256 digests of all input
files.  Timestamps are deliberately excluded: two runs with identical inputs
and flags must produce identical outputs, provenance included.
"""

from __future__ import annotations

import hashlib
from pathlib import Path

from .canonical import canonical_json


def file_digest(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return "sha256:" + h.hexdigest()


def build_provenance(command: str, flags: dict, inputs: list[str | Path],
                     version: str) -> dict:
    return {
        "tool": "mlpc",
        "version": version,
        "command": command,
        "flags": {k: v for k, v in sorted(flags.items())},
        "inputs": {str(Path(p)): file_digest(p) for p in sorted(map(str, inputs))},
    }


def write_sidecar(provenance: dict, artifact_path: str | Path) -> Path:
    """Write ``<artifact>.provenance.json`` next to a non-JSON artifact."""
    target = Path(str(artifact_path) + ".provenance.json")
    target.write_text(canonical_json(provenance, indent=2) + "\n", encoding="utf-8")
    return target
