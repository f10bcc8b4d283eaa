"""Run manifests: the semantic identity of a batch invocation.

A manifest captures everything that determines a command's outputs: the
subcommand, tool version, semantic parameters, content hashes of the inputs
and (when the census is involved) the class-table hash.  Worker counts and
file locations are deliberately excluded; equal manifests must mean
byte-identical outputs.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

__all__ = ["RunManifest", "file_sha256"]


def file_sha256(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


@dataclass(frozen=True)
class RunManifest:
    command: str
    tool_version: str
    parameters: dict = field(default_factory=dict)
    input_hashes: dict = field(default_factory=dict)
    class_table_hash: str | None = None

    def canonical_json(self) -> str:
        obj = {
            "command": self.command,
            "tool_version": self.tool_version,
            "parameters": self.parameters,
            "input_hashes": self.input_hashes,
            "class_table_hash": self.class_table_hash,
        }
        return json.dumps(obj, sort_keys=True, separators=(",", ":"))

    @property
    def sha256(self) -> str:
        return hashlib.sha256(self.canonical_json().encode("utf-8")).hexdigest()

    def write(self, path) -> None:
        obj = json.loads(self.canonical_json())
        obj["manifest_sha256"] = self.sha256
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(obj, fh, sort_keys=True, indent=2)
            fh.write("\n")
