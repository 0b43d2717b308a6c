"""Flat binary weight checkpoints.

Layout (little-endian throughout):

    magic   4 bytes  b"SKCK"
    version u32      format version (currently 1)
    hash    32 bytes sha256 of the canonical model-config serialization
    count   u32      number of tensor records
    record: name_len u32, name utf-8, rank u32, extents u32 * rank,
            payload float64 * prod(extents)
"""

from __future__ import annotations

import os
import struct

import numpy as np

from ..errors import CheckpointError

MAGIC = b"SKCK"
VERSION = 1


def save_checkpoint(path: str | os.PathLike, arrays: dict[str, np.ndarray], config_hash: bytes) -> None:
    if len(config_hash) != 32:
        raise CheckpointError(f"config hash must be 32 bytes, got {len(config_hash)}")
    chunks = [MAGIC, struct.pack("<I", VERSION), config_hash, struct.pack("<I", len(arrays))]
    for name, arr in arrays.items():
        arr = np.ascontiguousarray(arr, dtype="<f8")
        encoded = name.encode("utf-8")
        chunks.append(struct.pack("<I", len(encoded)))
        chunks.append(encoded)
        chunks.append(struct.pack("<I", arr.ndim))
        chunks.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        chunks.append(arr.tobytes())
    tmp = str(path) + ".tmp"
    with open(tmp, "wb") as fh:
        fh.write(b"".join(chunks))
    os.replace(tmp, path)


def load_checkpoint(path: str | os.PathLike) -> tuple[dict[str, np.ndarray], bytes]:
    with open(path, "rb") as fh:
        buf = fh.read()

    def take(n: int, pos: int) -> tuple[bytes, int]:
        if pos + n > len(buf):
            raise CheckpointError(f"truncated checkpoint at byte {pos} ({path})")
        return buf[pos:pos + n], pos + n

    raw, pos = take(4, 0)
    if raw != MAGIC:
        raise CheckpointError(f"bad checkpoint magic {raw!r} in {path}")
    raw, pos = take(4, pos)
    version = struct.unpack("<I", raw)[0]
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    config_hash, pos = take(32, pos)
    raw, pos = take(4, pos)
    count = struct.unpack("<I", raw)[0]

    arrays: dict[str, np.ndarray] = {}
    for _ in range(count):
        raw, pos = take(4, pos)
        name_len = struct.unpack("<I", raw)[0]
        raw, pos = take(name_len, pos)
        name = raw.decode("utf-8")
        raw, pos = take(4, pos)
        rank = struct.unpack("<I", raw)[0]
        raw, pos = take(4 * rank, pos)
        shape = struct.unpack(f"<{rank}I", raw) if rank else ()
        n = int(np.prod(shape)) if shape else 1
        raw, pos = take(8 * n, pos)
        arrays[name] = np.frombuffer(raw, dtype="<f8").reshape(shape).astype(np.float64)
    if pos != len(buf):
        raise CheckpointError(f"{len(buf) - pos} trailing bytes in checkpoint {path}")
    return arrays, config_hash
