"""Run manifests: enough recorded state to replay any CLI command.

A manifest stores the resolved argv (defaults, seeds and timestamps all
pinned), hashes of every input file and the tool version. Replaying the
resolved argv must reproduce hash-identical output artifacts; the manifest
itself is metadata, not an artifact.
"""

from __future__ import annotations

import hashlib
import json
from datetime import datetime, timezone
from pathlib import Path
from typing import Dict, List, Optional, Sequence

from . import __version__


def sha256_file(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def utc_now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


class RunManifest:
    def __init__(self, command: str, argv: Sequence[str]):
        self.command = command
        self.argv = list(argv)
        self.resolved_argv: List[str] = []
        self.config: Dict = {}
        self.inputs: Dict[str, str] = {}
        self.outputs: List[str] = []
        self.seeds: Dict[str, int] = {}
        self.started_at = utc_now()
        self.finished_at: Optional[str] = None

    def add_input(self, path) -> None:
        path = Path(path)
        self.inputs[str(path)] = sha256_file(path)

    def add_output(self, path) -> None:
        self.outputs.append(str(path))

    def to_dict(self) -> dict:
        return {
            "tool": "debtscope",
            "version": __version__,
            "command": self.command,
            "argv": self.argv,
            "resolved_argv": self.resolved_argv,
            "config": self.config,
            "inputs": self.inputs,
            "outputs": self.outputs,
            "seeds": self.seeds,
            "started_at": self.started_at,
            "finished_at": self.finished_at,
        }

    def write(self, path) -> None:
        self.finished_at = utc_now()
        Path(path).write_text(
            json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )


def load_manifest(path) -> dict:
    return json.loads(Path(path).read_text("utf-8"))
