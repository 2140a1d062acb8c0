"""Run manifests: everything needed to reproduce a command's outputs."""
from __future__ import annotations

import hashlib
import json
import zlib
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__

MANIFEST_NAME = "manifest.json"


def substream(seed: int, name: str) -> np.random.Generator:
    """Independent generator for the named stream of one ``--seed``."""
    return np.random.default_rng([int(seed), zlib.crc32(name.encode())])


def file_hash(path) -> str:
    path = Path(path)
    h = hashlib.sha256()
    if path.is_dir():
        for p in sorted(path.iterdir()):
            if p.is_file():
                h.update(p.name.encode())
                h.update(p.read_bytes())
    else:
        h.update(path.read_bytes())
    return h.hexdigest()


@dataclass
class RunManifest:
    command: str
    parameters: dict
    argv: list
    version: str = __version__
    input_hashes: dict = field(default_factory=dict)
    outputs: list = field(default_factory=list)
    runtime_seconds: float = None

    def add_input(self, path):
        if path is not None:
            self.input_hashes[str(path)] = file_hash(path)

    def write(self, out_dir) -> Path:
        path = Path(out_dir) / MANIFEST_NAME
        with open(path, "w") as fh:
            json.dump(asdict(self), fh, indent=2, sort_keys=True)
            fh.write("\n")
        return path

    @classmethod
    def load(cls, path) -> RunManifest:
        path = Path(path)
        if path.is_dir():
            path = path / MANIFEST_NAME
        data = json.loads(path.read_text())
        return cls(**data)

    def check_inputs(self) -> list:
        """Inputs whose content no longer matches the recorded hash."""
        bad = []
        for p, h in self.input_hashes.items():
            if not Path(p).exists() or file_hash(p) != h:
                bad.append(p)
        return bad

    def replay_argv(self, out_dir=None) -> list:
        argv = list(self.argv)
        if out_dir is not None:
            if "--out-dir" in argv:
                argv[argv.index("--out-dir") + 1] = str(out_dir)
            else:
                argv += ["--out-dir", str(out_dir)]
        return argv
