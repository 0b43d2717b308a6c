"""Binary PPM (P6, maxval 255) reading and bit-exact canonical writing.

The only image container in the pipeline.  The reader accepts any legal
P6 header (comments, arbitrary whitespace); the writer always emits the
canonical form ``P6\\n{W} {H}\\n255\\n`` + raw RGB, so re-encoding a
decoded file is byte-stable.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from ..errors import ParseError


@dataclass
class Frame:
    """Decoded raster image: H x W x 3 channel values in [0,1] + timestamp (ns)."""

    pixels: np.ndarray
    timestamp: int = 0

    def __post_init__(self):
        self.pixels = np.asarray(self.pixels, dtype=np.float64)
        if self.pixels.ndim != 3 or self.pixels.shape[2] != 3:
            raise ParseError(f"Frame pixels must be HxWx3, got {self.pixels.shape}")

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]


def _read_token(buf: bytes, pos: int) -> tuple[bytes, int]:
    # skip whitespace and '#' comments
    n = len(buf)
    while pos < n:
        c = buf[pos:pos + 1]
        if c == b"#":
            while pos < n and buf[pos:pos + 1] != b"\n":
                pos += 1
        elif c.isspace():
            pos += 1
        else:
            break
    if pos >= n:
        raise ParseError(f"unexpected end of header at byte {pos}")
    start = pos
    while pos < n and not buf[pos:pos + 1].isspace():
        pos += 1
    return buf[start:pos], pos


def read_ppm(path: str | os.PathLike) -> Frame:
    """Decode a binary P6 PPM with maxval 255 into a [0,1] float frame."""
    with open(path, "rb") as fh:
        buf = fh.read()

    magic, pos = _read_token(buf, 0)
    if magic != b"P6":
        raise ParseError(f"not a binary PPM (magic {magic!r} at byte 0)")
    fields = []
    for _ in range(3):
        tok, pos = _read_token(buf, pos)
        try:
            fields.append(int(tok))
        except ValueError:
            raise ParseError(f"non-numeric header field {tok!r} at byte {pos - len(tok)}") from None
    width, height, maxval = fields
    if width <= 0 or height <= 0:
        raise ParseError(f"invalid dimensions {width}x{height} at byte {pos}")
    if maxval != 255:
        raise ParseError(f"unsupported maxval {maxval} at byte {pos} (only 255)")
    if pos >= len(buf) or not buf[pos:pos + 1].isspace():
        raise ParseError(f"missing single whitespace after maxval at byte {pos}")
    pos += 1

    need = width * height * 3
    payload = buf[pos:pos + need]
    if len(payload) < need:
        raise ParseError(f"truncated pixel payload at byte {pos + len(payload)} "
                         f"(need {need} bytes, have {len(payload)})")
    pixels = np.frombuffer(payload, dtype=np.uint8).astype(np.float64) / 255.0
    return Frame(pixels.reshape(height, width, 3))


def encode_ppm(frame: Frame) -> bytes:
    """Canonical P6 bytes for a frame (values rounded to 1/255 steps)."""
    q = np.rint(np.clip(frame.pixels, 0.0, 1.0) * 255.0).astype(np.uint8)
    header = f"P6\n{frame.width} {frame.height}\n255\n".encode("ascii")
    return header + q.tobytes()


def write_ppm(frame: Frame, path: str | os.PathLike) -> None:
    """Write the canonical P6 encoding of ``frame`` to ``path``."""
    data = encode_ppm(frame)
    tmp = str(path) + ".tmp"
    with open(tmp, "wb") as fh:
        fh.write(data)
    os.replace(tmp, path)
