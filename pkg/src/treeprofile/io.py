"""Flat-file output: CSV tables, JSON documents and run manifests."""

from __future__ import annotations

import csv
import hashlib
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__


def fmt(x) -> str:
    """17 significant digits, '.' decimal separator; ints stay ints."""
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, str):
        return x
    return format(float(x), ".17g")


def _expand(row):
    out = []
    for x in row:
        if isinstance(x, (complex, np.complexfloating)):
            out += [fmt(x.real), fmt(x.imag)]
        else:
            out.append(fmt(x))
    return out


def write_csv(path, header, rows) -> Path:
    """Write rows to ``path``; complex entries become two (re, im) columns."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow(_expand(row))
    return path


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if np.isfinite(x) else str(x)
    if isinstance(obj, (complex, np.complexfloating)):
        return {"re": float(obj.real), "im": float(obj.imag)}
    return obj


def to_json(obj) -> str:
    return json.dumps(_plain(obj), indent=2, sort_keys=True)


def write_json(path, obj) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(to_json(obj) + "\n")
    return path


def digest(path) -> str:
    h = hashlib.sha256()
    with Path(path).open("rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()


@dataclass
class RunManifest:
    """Config echo, checks and file digests of one CLI run.

    Wall-clock data lives under ``volatile`` so that two runs with the same
    config produce identical manifests once that key is dropped.
    """

    command: str
    config: dict
    checks: list = field(default_factory=list)
    files: dict = field(default_factory=dict)
    started: float = field(default_factory=time.time)

    def add_file(self, path):
        path = Path(path)
        self.files[path.name] = digest(path)

    def add_check(self, name, passed, **measured):
        self.checks.append({"name": name, "passed": bool(passed), "measured": measured})

    @property
    def passed(self) -> bool:
        return all(c["passed"] for c in self.checks)

    def as_dict(self):
        return {
            "command": self.command,
            "config": self.config,
            "version": __version__,
            "checks": self.checks,
            "passed": self.passed,
            "files": dict(sorted(self.files.items())),
            "volatile": {"started": self.started, "wall_time": time.time() - self.started},
        }

    def write(self, directory) -> Path:
        return write_json(Path(directory) / "manifest.json", self.as_dict())
