"""Flat binary weight files.

Layout (little-endian): magic ``b"FAWT"``, uint32 version, uint32 count, then per
tensor uint32 name length, utf-8 name, uint32 rank, rank x uint64 dims and the
raw float64 values in C order.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from ..errors import InvalidArgument

MAGIC = b"FAWT"
VERSION = 1


def dumps_weights(named: dict[str, np.ndarray]) -> bytes:
    parts = [MAGIC, struct.pack("<II", VERSION, len(named))]
    for name, arr in named.items():
        arr = np.asarray(arr, dtype="<f8")  # tobytes() is C order; ascontiguousarray would promote 0-d
        raw = name.encode("utf-8")
        parts.append(struct.pack("<I", len(raw)))
        parts.append(raw)
        parts.append(struct.pack("<I", arr.ndim))
        parts.append(struct.pack(f"<{arr.ndim}Q", *arr.shape))
        parts.append(arr.tobytes())
    return b"".join(parts)


def loads_weights(buf: bytes) -> dict[str, np.ndarray]:
    if buf[:4] != MAGIC:
        raise InvalidArgument("not a weight file")
    version, count = struct.unpack_from("<II", buf, 4)
    if version != VERSION:
        raise InvalidArgument(f"unsupported weight file version {version}")
    pos = 12
    out: dict[str, np.ndarray] = {}
    try:
        for _ in range(count):
            (n,) = struct.unpack_from("<I", buf, pos)
            pos += 4
            name = buf[pos : pos + n].decode("utf-8")
            pos += n
            (rank,) = struct.unpack_from("<I", buf, pos)
            pos += 4
            dims = struct.unpack_from(f"<{rank}Q", buf, pos)
            pos += 8 * rank
            size = int(np.prod(dims)) if rank else 1
            arr = np.frombuffer(buf, dtype="<f8", count=size, offset=pos).reshape(dims)
            pos += 8 * size
            out[name] = arr.astype(np.float64)
    except (struct.error, ValueError) as exc:
        raise InvalidArgument("truncated weight file") from exc
    if pos != len(buf):
        raise InvalidArgument("trailing bytes in weight file")
    return out


def save_weights(path, named: dict[str, np.ndarray]) -> None:
    Path(path).write_bytes(dumps_weights(named))


def load_weights(path) -> dict[str, np.ndarray]:
    return loads_weights(Path(path).read_bytes())
