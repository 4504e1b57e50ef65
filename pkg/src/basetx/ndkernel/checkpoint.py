"""Binary checkpoint container shared by all modules.

Layout (little-endian): magic ``BTWT``, format version u32, entry count
u32, then per entry: name length u32 + UTF-8 bytes, dtype tag u8
(0=float32, 1=float64), rank u32, dims u64 each, raw row-major payload.
Entries are written sorted by name so identical states serialize to
identical bytes.
"""

from __future__ import annotations

import hashlib
import io
import struct
from pathlib import Path

import numpy as np

MAGIC = b"BTWT"
FORMAT_VERSION = 1

_TAG_TO_DTYPE = {0: np.dtype("<f4"), 1: np.dtype("<f8")}
_DTYPE_TO_TAG = {np.dtype(np.float32): 0, np.dtype(np.float64): 1}


class CheckpointError(ValueError):
    """Malformed or mismatched checkpoint data."""


def serialize(arrays: dict[str, np.ndarray]) -> bytes:
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<I", FORMAT_VERSION))
    buf.write(struct.pack("<I", len(arrays)))
    for name in sorted(arrays):
        arr = np.ascontiguousarray(arrays[name])
        tag = _DTYPE_TO_TAG.get(arr.dtype)
        if tag is None:
            raise CheckpointError(f"unsupported dtype {arr.dtype} for entry '{name}'")
        raw = name.encode("utf-8")
        buf.write(struct.pack("<I", len(raw)))
        buf.write(raw)
        buf.write(struct.pack("<B", tag))
        buf.write(struct.pack("<I", arr.ndim))
        for dim in arr.shape:
            buf.write(struct.pack("<Q", dim))
        buf.write(arr.astype(_TAG_TO_DTYPE[tag], copy=False).tobytes())
    return buf.getvalue()


def _read(buf: memoryview, offset: int, size: int, what: str) -> tuple[memoryview, int]:
    if offset + size > len(buf):
        raise CheckpointError(
            f"truncated checkpoint: needed {size} bytes for {what} at byte {offset}"
        )
    return buf[offset : offset + size], offset + size


def deserialize(blob: bytes) -> dict[str, np.ndarray]:
    buf = memoryview(blob)
    chunk, off = _read(buf, 0, 4, "magic")
    if bytes(chunk) != MAGIC:
        raise CheckpointError(f"bad magic {bytes(chunk)!r} at byte 0, expected {MAGIC!r}")
    chunk, off = _read(buf, off, 4, "version")
    version = struct.unpack("<I", chunk)[0]
    if version != FORMAT_VERSION:
        raise CheckpointError(f"unsupported format version {version} at byte 4")
    chunk, off = _read(buf, off, 4, "entry count")
    count = struct.unpack("<I", chunk)[0]
    arrays: dict[str, np.ndarray] = {}
    for _ in range(count):
        chunk, off = _read(buf, off, 4, "name length")
        name_len = struct.unpack("<I", chunk)[0]
        chunk, off = _read(buf, off, name_len, "name")
        name = bytes(chunk).decode("utf-8")
        chunk, off = _read(buf, off, 1, "dtype tag")
        tag = chunk[0]
        dtype = _TAG_TO_DTYPE.get(tag)
        if dtype is None:
            raise CheckpointError(f"unknown dtype tag {tag} at byte {off - 1}")
        chunk, off = _read(buf, off, 4, "rank")
        rank = struct.unpack("<I", chunk)[0]
        shape = []
        for _ in range(rank):
            chunk, off = _read(buf, off, 8, "shape dim")
            shape.append(struct.unpack("<Q", chunk)[0])
        nbytes = int(np.prod(shape, dtype=np.int64)) * dtype.itemsize if shape else dtype.itemsize
        if not shape:
            nbytes = dtype.itemsize
        chunk, off = _read(buf, off, nbytes, f"payload of '{name}'")
        arrays[name] = np.frombuffer(bytes(chunk), dtype=dtype).reshape(shape).copy()
    if off != len(buf):
        raise CheckpointError(f"trailing garbage at byte {off}")
    return arrays


def save_checkpoint(path: str | Path, arrays: dict[str, np.ndarray]) -> str:
    blob = serialize(arrays)
    Path(path).write_bytes(blob)
    return hashlib.sha256(blob).hexdigest()


def load_checkpoint(path: str | Path) -> dict[str, np.ndarray]:
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"checkpoint not found: {p}")
    return deserialize(p.read_bytes())


def fingerprint(arrays: dict[str, np.ndarray]) -> str:
    """Hash of the canonical serialization (== hash of the saved file)."""
    return hashlib.sha256(serialize(arrays)).hexdigest()


def fingerprint_file(path: str | Path) -> str:
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"checkpoint not found: {p}")
    return hashlib.sha256(p.read_bytes()).hexdigest()
