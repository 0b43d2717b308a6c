"""Sliding-window sequence assembly with a content-addressed flow cache.

A window of length L over temporally adjacent index rows yields L
frames, L flow fields (the first is always the zero field), and
per-step angle/speed labels.  Flow between a frame pair is computed at
most once: results are stored beside the frames, keyed by the hash of
both frames' bytes plus the flow parameters, and written atomically.

Cached planes are float32 (the file format), so flow fields delivered
by a sequence set are canonically float32-quantized whether they came
from the cache or were just computed; a cache hit is bit-identical to
a recompute.
"""

from __future__ import annotations

import hashlib
import os
import struct
from dataclasses import dataclass

import numpy as np

from ..errors import ContractError, ParseError
from ..imaging import FlowField, Frame, compute_dense_flow, read_ppm
from .index import DriveIndex

CACHE_MAGIC = b"OFC1"
CACHE_DIR_NAME = "flow_cache"


@dataclass
class FlowParams:
    levels: int = 3
    iters: int = 50
    alpha: float = 15.0

    def tag(self) -> str:
        return f"l{self.levels}-i{self.iters}-a{self.alpha!r}"


@dataclass
class SequenceSample:
    frames: list[Frame]
    flows: list[FlowField]
    angles: np.ndarray
    speeds: np.ndarray
    timestamps: np.ndarray


def _write_cached_flow(path: str, flow: FlowField) -> None:
    h, w = flow.shape
    payload = (CACHE_MAGIC + struct.pack("<II", h, w)
               + flow.u.astype("<f4").tobytes() + flow.v.astype("<f4").tobytes())
    tmp = path + f".tmp{os.getpid()}"
    with open(tmp, "wb") as fh:
        fh.write(payload)
    os.replace(tmp, path)


def _read_cached_flow(path: str) -> FlowField:
    with open(path, "rb") as fh:
        buf = fh.read()
    if buf[:4] != CACHE_MAGIC:
        raise ParseError(f"bad flow-cache magic in {path}")
    h, w = struct.unpack("<II", buf[4:12])
    n = h * w * 4
    if len(buf) != 12 + 2 * n:
        raise ParseError(f"flow-cache size mismatch in {path}")
    u = np.frombuffer(buf[12:12 + n], dtype="<f4").reshape(h, w)
    v = np.frombuffer(buf[12 + n:], dtype="<f4").reshape(h, w)
    return FlowField(u.astype(np.float64), v.astype(np.float64))


class SequenceSet:
    """Lazily materialized sequence windows over a drive index."""

    def __init__(self, index: DriveIndex, seq_len: int, stride: int = 1,
                 flow_params: FlowParams | None = None, use_cache: bool = True,
                 with_flow: bool = True):
        if seq_len < 1 or stride < 1:
            raise ContractError(f"seq_len and stride must be >= 1, got {seq_len}, {stride}")
        self.index = index
        self.seq_len = seq_len
        self.flow_params = flow_params or FlowParams()
        self.use_cache = use_cache
        self.with_flow = with_flow
        self._frame_cache: dict[str, Frame] = {}

        # windows over rows whose ordinals are consecutive (no split gaps)
        self.windows: list[int] = []
        n = len(index)
        start = 0
        while start + seq_len <= n:
            rows = index.rows[start:start + seq_len]
            if all(b.ordinal == a.ordinal + 1 for a, b in zip(rows, rows[1:])):
                self.windows.append(start)
                start += stride
            else:
                start += 1

    def __len__(self) -> int:
        return len(self.windows)

    def _load_frame(self, row) -> Frame:
        path = self.index.frame_path(row)
        frame = self._frame_cache.get(path)
        if frame is None:
            frame = read_ppm(path)
            frame.timestamp = row.timestamp
            self._frame_cache[path] = frame
        return frame

    def _cache_path(self, prev: Frame, next: Frame) -> str:
        digest = hashlib.sha256()
        digest.update(self.flow_params.tag().encode("ascii"))
        digest.update(np.ascontiguousarray(prev.pixels).tobytes())
        digest.update(np.ascontiguousarray(next.pixels).tobytes())
        cache_dir = os.path.join(self.index.base_dir, CACHE_DIR_NAME)
        os.makedirs(cache_dir, exist_ok=True)
        return os.path.join(cache_dir, digest.hexdigest()[:32] + ".flow")

    def _flow_between(self, prev: Frame, next: Frame) -> FlowField:
        if self.use_cache:
            path = self._cache_path(prev, next)
            if os.path.exists(path):
                return _read_cached_flow(path)
        p = self.flow_params
        flow = compute_dense_flow(prev, next, levels=p.levels, iters=p.iters, alpha=p.alpha)
        flow = FlowField(flow.u.astype(np.float32).astype(np.float64),
                         flow.v.astype(np.float32).astype(np.float64))
        if self.use_cache:
            _write_cached_flow(path, flow)
        return flow

    def __getitem__(self, i: int) -> SequenceSample:
        start = self.windows[i]
        rows = self.index.rows[start:start + self.seq_len]
        frames = [self._load_frame(r) for r in rows]
        flows: list[FlowField] = []
        if self.with_flow:
            flows.append(FlowField.zeros(frames[0].height, frames[0].width))
            for prev, next in zip(frames[:-1], frames[1:]):
                flows.append(self._flow_between(prev, next))
        return SequenceSample(
            frames=frames,
            flows=flows,
            angles=np.array([r.angle for r in rows]),
            speeds=np.array([r.speed for r in rows]),
            timestamps=np.array([r.timestamp for r in rows], dtype=np.int64),
        )


def make_sequences(index: DriveIndex, seq_len: int, stride: int = 1,
                   flow_params: FlowParams | None = None, use_cache: bool = True,
                   with_flow: bool = True) -> SequenceSet:
    """Windows over consecutive frames; flows computed or cache-read lazily."""
    return SequenceSet(index, seq_len, stride, flow_params, use_cache, with_flow)
