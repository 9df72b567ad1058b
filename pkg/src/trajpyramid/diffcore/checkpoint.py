"""Versioned binary checkpoint container.

Layout (all integers little-endian)::

    magic      8 bytes   b"TPYRCKPT"
    version    uint32    FORMAT_VERSION
    n_blocks   uint32
    n_blocks times:
        name_len  uint16, name (utf-8)
        kind      uint8     0 = float64 array, 1 = utf-8 JSON document
        kind 0:   ndim uint8, ndim x uint64 extents, prod(extents) x float64 (C order)
        kind 1:   n_bytes uint64, payload

Blocks keep their insertion order.  Readers refuse any other magic or version.
"""
from __future__ import annotations

import json
import struct
from pathlib import Path
from typing import Any

import numpy as np

from ..errors import CheckpointError

MAGIC = b"TPYRCKPT"
FORMAT_VERSION = 1
META_BLOCK = "__meta__"


def dumps(arrays: dict[str, np.ndarray], meta: dict[str, Any] | None = None) -> bytes:
    parts = [MAGIC, struct.pack("<II", FORMAT_VERSION, len(arrays) + (meta is not None))]

    def header(name: str, kind: int) -> bytes:
        raw = name.encode("utf-8")
        return struct.pack("<H", len(raw)) + raw + struct.pack("<B", kind)

    if meta is not None:
        payload = json.dumps(meta, sort_keys=True).encode("utf-8")
        parts += [header(META_BLOCK, 1), struct.pack("<Q", len(payload)), payload]
    for name, arr in arrays.items():
        arr = np.array(arr, dtype="<f8", order="C")  # keeps 0-d shapes, unlike ascontiguousarray
        parts += [header(name, 0), struct.pack("<B", arr.ndim), struct.pack(f"<{arr.ndim}Q", *arr.shape), arr.tobytes()]
    return b"".join(parts)


def loads(buf: bytes) -> tuple[dict[str, np.ndarray], dict[str, Any]]:
    if buf[:8] != MAGIC:
        raise CheckpointError("not a checkpoint file (bad magic)")
    try:
        version, n_blocks = struct.unpack_from("<II", buf, 8)
    except struct.error as e:
        raise CheckpointError("truncated checkpoint header") from e
    if version != FORMAT_VERSION:
        raise CheckpointError(f"checkpoint format version {version}, expected {FORMAT_VERSION}")
    pos = 16
    arrays: dict[str, np.ndarray] = {}
    meta: dict[str, Any] = {}
    try:
        for _ in range(n_blocks):
            (nlen,) = struct.unpack_from("<H", buf, pos)
            pos += 2
            name = buf[pos : pos + nlen].decode("utf-8")
            pos += nlen
            (kind,) = struct.unpack_from("<B", buf, pos)
            pos += 1
            if kind == 0:
                (ndim,) = struct.unpack_from("<B", buf, pos)
                pos += 1
                shape = struct.unpack_from(f"<{ndim}Q", buf, pos)
                pos += 8 * ndim
                count = int(np.prod(shape)) if ndim else 1
                if pos + 8 * count > len(buf):
                    raise CheckpointError(f"truncated array block {name!r}")
                arrays[name] = np.frombuffer(buf, dtype="<f8", count=count, offset=pos).reshape(shape).astype(np.float64)
                pos += 8 * count
            elif kind == 1:
                (n,) = struct.unpack_from("<Q", buf, pos)
                pos += 8
                doc = json.loads(buf[pos : pos + n].decode("utf-8"))
                pos += n
                if name == META_BLOCK:
                    meta = doc
                else:
                    meta[name] = doc
            else:
                raise CheckpointError(f"unknown block kind {kind}")
    except (struct.error, UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CheckpointError(f"corrupt checkpoint: {e}") from e
    return arrays, meta


def save(path, arrays: dict[str, np.ndarray], meta: dict[str, Any] | None = None) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(dumps(arrays, meta))
    tmp.replace(path)


def load(path) -> tuple[dict[str, np.ndarray], dict[str, Any]]:
    path = Path(path)
    if not path.is_file():
        raise CheckpointError(f"checkpoint not found: {path}")
    return loads(path.read_bytes())
