"""Drive-index CSV reading and contiguous train/val splitting.

The index format is one header row ``timestamp,camera,filename,angle,
torque,speed`` followed by data rows: integer nanosecond timestamps,
camera name (center/left/right), frame path relative to the CSV, angle
in radians, torque in N*m (carried, unused), speed in m/s.

Each loaded row keeps its post-sort ordinal so that windowing can tell
whether two rows were temporally adjacent even after a split removes a
block from the middle.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from ..errors import ContractError, ParseError

COLUMNS = ("timestamp", "camera", "filename", "angle", "torque", "speed")
CAMERAS = ("center", "left", "right")


@dataclass
class IndexRow:
    timestamp: int
    camera: str
    filename: str
    angle: float
    torque: float
    speed: float
    ordinal: int = -1


class DriveIndex:
    """Timestamp-sorted rows plus the directory frame paths resolve against."""

    def __init__(self, rows: list[IndexRow], base_dir: str):
        self.rows = rows
        self.base_dir = base_dir

    def __len__(self) -> int:
        return len(self.rows)

    def __getitem__(self, i: int) -> IndexRow:
        return self.rows[i]

    def __iter__(self):
        return iter(self.rows)

    def frame_path(self, row: IndexRow) -> str:
        return os.path.join(self.base_dir, row.filename)


def load_index(csv_path: str | os.PathLike, camera_filter: str | None = "center",
               check_paths: bool = True) -> DriveIndex:
    """Parse, filter by camera, and timestamp-sort a drive index.

    Numeric problems are reported with their line number.  With
    ``check_paths`` every referenced frame must exist on disk.
    """
    base_dir = os.path.dirname(os.path.abspath(csv_path))
    with open(csv_path, "r", encoding="ascii") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise ParseError(f"{csv_path}: empty file (missing header)")
    header = tuple(c.strip() for c in lines[0].split(","))
    if header != COLUMNS:
        raise ParseError(f"{csv_path}:1: header {header} != expected {COLUMNS}")

    rows: list[IndexRow] = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != len(COLUMNS):
            raise ParseError(f"{csv_path}:{lineno}: expected {len(COLUMNS)} columns, got {len(parts)}")
        try:
            ts = int(parts[0])
            angle = float(parts[3])
            torque = float(parts[4])
            speed = float(parts[5])
        except ValueError as exc:
            raise ParseError(f"{csv_path}:{lineno}: {exc}") from None
        camera = parts[1].strip()
        if camera not in CAMERAS:
            raise ParseError(f"{csv_path}:{lineno}: unknown camera {camera!r}")
        if not np.isfinite(angle):
            raise ParseError(f"{csv_path}:{lineno}: non-finite angle")
        if camera_filter is not None and camera != camera_filter:
            continue
        rows.append(IndexRow(ts, camera, parts[2].strip(), angle, torque, speed))

    rows.sort(key=lambda r: r.timestamp)
    for i, row in enumerate(rows):
        row.ordinal = i
    index = DriveIndex(rows, base_dir)
    if check_paths:
        for row in rows:
            path = index.frame_path(row)
            if not os.path.exists(path):
                raise ParseError(f"{csv_path}: frame not found: {path}")
    return index


def split(index: DriveIndex, train_frac: float, seed: int | None = None) -> tuple[DriveIndex, DriveIndex]:
    """Carve out one contiguous validation block; the rest is training.

    Contiguous (rather than random per-row) splitting avoids leaking
    near-duplicate consecutive frames across the boundary.  With a seed
    the block position is drawn uniformly; otherwise it is the tail.
    Ordinals are preserved, so no sequence window ever straddles the cut.
    """
    if not (0.0 < train_frac < 1.0):
        raise ContractError(f"train_frac must be in (0,1), got {train_frac}")
    n = len(index)
    n_train = int(round(n * train_frac))
    n_val = n - n_train
    if seed is None:
        start = n_train
    else:
        start = int(np.random.default_rng(seed).integers(0, n_train + 1))
    val_rows = index.rows[start:start + n_val]
    train_rows = index.rows[:start] + index.rows[start + n_val:]
    return DriveIndex(train_rows, index.base_dir), DriveIndex(val_rows, index.base_dir)
