"""CSV and binary interchange plus run manifests.

CSV is the single interchange format: one header row, comma separators,
full-precision (shortest round-trip) decimal floats.  Trajectory archives
use a small binary layout documented in the README: an ASCII magic, a
version word, ensemble size, snapshot count, dt, then per snapshot the
positions and weights as little-endian 64-bit floats.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .fields import TrajectoryArchive

ARCHIVE_MAGIC = b"SSAR"
ARCHIVE_VERSION = 1


def _fmt(value) -> str:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_csv(path: str | Path, header: list[str], columns: list[np.ndarray]) -> Path:
    """Write columns to a CSV file with full-precision floats."""
    path = Path(path)
    rows = zip(*columns)
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")
    return path


def read_csv(path: str | Path) -> dict[str, np.ndarray]:
    """Read a CSV written by :func:`write_csv` into named float columns."""
    path = Path(path)
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        data = [line.strip().split(",") for line in fh if line.strip()]
    cols = {name: np.array([float(row[i]) for row in data]) for i, name in enumerate(header)}
    return cols


def snapshot_name(prefix: str, step: int) -> str:
    return f"{prefix}_{step:06d}.csv"


def write_archive(path: str | Path, archive: TrajectoryArchive) -> Path:
    """Dump an archive: header then (positions, weights) per snapshot."""
    path = Path(path)
    n = archive.n_total
    snaps = len(archive)
    with open(path, "wb") as fh:
        fh.write(ARCHIVE_MAGIC)
        fh.write(struct.pack("<I", ARCHIVE_VERSION))
        fh.write(struct.pack("<Q", n))
        fh.write(struct.pack("<Q", snaps))
        fh.write(struct.pack("<d", archive.dt))
        for k in range(snaps):
            fh.write(np.ascontiguousarray(archive.positions[k], dtype="<f8").tobytes())
            fh.write(np.ascontiguousarray(archive.weights[k], dtype="<f8").tobytes())
    return path


def read_archive(path: str | Path) -> TrajectoryArchive:
    path = Path(path)
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != ARCHIVE_MAGIC:
            raise ValueError(f"{path} is not a trajectory archive (magic {magic!r})")
        (version,) = struct.unpack("<I", fh.read(4))
        if version != ARCHIVE_VERSION:
            raise ValueError(f"unsupported archive version {version}")
        (n,) = struct.unpack("<Q", fh.read(8))
        (snaps,) = struct.unpack("<Q", fh.read(8))
        (dt,) = struct.unpack("<d", fh.read(8))
        archive = TrajectoryArchive(dt=dt, n_total=int(n))
        for _ in range(snaps):
            pos = np.frombuffer(fh.read(8 * n), dtype="<f8").astype(float)
            w = np.frombuffer(fh.read(8 * n), dtype="<f8").astype(float)
            archive.positions.append(pos)
            archive.weights.append(w)
    return archive


def sha256_file(path: str | Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


@dataclass
class RunManifest:
    """Resolved config, output listing with checksums, and diagnostics."""

    command: str
    config: dict
    outputs: list[dict] = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)
    artifact_version: str = "0.1.0"
    created: str = ""

    def add_output(self, root: Path, path: Path) -> None:
        self.outputs.append(
            {
                "path": str(path.relative_to(root)),
                "sha256": sha256_file(path),
                "bytes": path.stat().st_size,
            }
        )

    def write(self, root: Path) -> Path:
        self.created = datetime.now(timezone.utc).isoformat()
        out = Path(root) / "manifest.json"
        with open(out, "w") as fh:
            json.dump(
                {
                    "artifact_version": self.artifact_version,
                    "created": self.created,
                    "command": self.command,
                    "config": self.config,
                    "outputs": self.outputs,
                    "diagnostics": self.diagnostics,
                },
                fh,
                indent=2,
                sort_keys=True,
            )
            fh.write("\n")
        return out


def load_manifest(path: str | Path) -> dict:
    with open(path) as fh:
        return json.load(fh)
