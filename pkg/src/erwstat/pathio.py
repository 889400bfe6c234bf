"""Path serialization.

CSV: header ``k,x,s`` then one row per step.  Lines starting with ``#`` are
metadata and ignored on read.

Binary: magic ``ERW1``, the length as little-endian uint64, then the steps
bit-packed (+1 -> 1, -1 -> 0), step k in bit ``k % 8`` of byte ``k // 8``.
"""

from __future__ import annotations

import io
import struct

import numpy as np

from .errors import PathFormatError
from .walk import WalkPath

MAGIC = b"ERW1"
_HEADER = struct.Struct("<4sQ")


def path_to_csv(path: WalkPath, metadata: dict | None = None) -> str:
    buf = io.StringIO()
    for key, value in (metadata or {}).items():
        buf.write(f"# {key}={value}\n")
    buf.write("k,x,s\n")
    for k, (x, s) in enumerate(zip(path.steps.tolist(), path.positions.tolist()), start=1):
        buf.write(f"{k},{x},{s}\n")
    return buf.getvalue()


def path_from_csv(text: str) -> WalkPath:
    steps = []
    header_seen = False
    s_prev = 0
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if not header_seen:
            if line.replace(" ", "") != "k,x,s":
                raise PathFormatError("expected header 'k,x,s'", lineno)
            header_seen = True
            continue
        parts = line.split(",")
        if len(parts) != 3:
            raise PathFormatError(f"expected 3 fields, got {len(parts)}", lineno)
        try:
            k, x, s = (int(v) for v in parts)
        except ValueError:
            raise PathFormatError("non-integer field", lineno) from None
        if k != len(steps) + 1:
            raise PathFormatError(f"expected k={len(steps) + 1}, got {k}", lineno)
        if x not in (-1, 1):
            raise PathFormatError(f"step must be -1 or +1, got {x}", lineno)
        if s != s_prev + x:
            raise PathFormatError(f"position {s} inconsistent with prefix sum {s_prev + x}", lineno)
        steps.append(x)
        s_prev = s
    if not steps:
        raise PathFormatError("no steps found")
    return WalkPath(steps)


def path_to_bytes(path: WalkPath) -> bytes:
    bits = (path.steps == 1).astype(np.uint8)
    return _HEADER.pack(MAGIC, path.n) + np.packbits(bits, bitorder="little").tobytes()


def path_from_bytes(data: bytes) -> WalkPath:
    if len(data) < _HEADER.size:
        raise PathFormatError("truncated header")
    magic, n = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise PathFormatError(f"bad magic {magic!r}")
    payload = np.frombuffer(data, dtype=np.uint8, offset=_HEADER.size)
    if payload.size != (n + 7) // 8:
        raise PathFormatError(f"payload holds {payload.size} bytes, expected {(n + 7) // 8}")
    if n < 1:
        raise PathFormatError("empty path")
    bits = np.unpackbits(payload, count=n, bitorder="little")
    return WalkPath(bits.astype(np.int64) * 2 - 1)
