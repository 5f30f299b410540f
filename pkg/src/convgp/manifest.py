"""Run manifests: everything needed to reproduce a CLI invocation.

A manifest records the command, the fully-resolved configuration, the
master seed, module versions (including the active compute backend),
sha256 hashes of input files and the list of produced outputs.  It is
written atomically at the end of a run; re-executing the recorded
command reproduces the outputs byte for byte.
"""

from __future__ import annotations

import hashlib
import json
import os
import time
from dataclasses import dataclass, field


def file_sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _versions() -> dict:
    import numpy
    import scipy

    from . import __version__, backend

    return {
        "convgp": __version__,
        "numpy": numpy.__version__,
        "scipy": scipy.__version__,
        "backend": backend.BACKEND,
    }


@dataclass
class RunManifest:
    command: list[str]
    config: dict
    master_seed: int | None = None
    inputs: dict = field(default_factory=dict)  # path -> sha256
    outputs: list = field(default_factory=list)
    versions: dict = field(default_factory=_versions)
    wall_clock_s: float | None = None
    _t0: float = field(default_factory=time.perf_counter, repr=False)

    def add_input(self, path) -> None:
        self.inputs[str(path)] = file_sha256(path)

    def add_output(self, path) -> None:
        p = str(path)
        if p not in self.outputs:
            self.outputs.append(p)

    def write(self, path) -> None:
        self.wall_clock_s = round(time.perf_counter() - self._t0, 3)
        doc = {
            "command": self.command,
            "config": self.config,
            "master_seed": self.master_seed,
            "versions": self.versions,
            "inputs": self.inputs,
            "outputs": self.outputs,
            "wall_clock_s": self.wall_clock_s,
        }
        tmp = f"{path}.tmp.{os.getpid()}"
        with open(tmp, "w") as f:
            json.dump(doc, f, indent=2, sort_keys=True)
            f.write("\n")
        os.replace(tmp, path)
