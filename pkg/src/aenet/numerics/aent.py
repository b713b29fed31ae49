"""Reader/writer for the ``.aent`` binary tensor format.

Layout (all little-endian)::

    b"AENT" | u16 version (=1) | u16 ndim | ndim x u64 extents | f32 payload

The payload is row-major float32, so float64 values round-trip only to
float32 precision.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

MAGIC = b"AENT"
VERSION = 1
_HEADER = struct.Struct("<4sHH")


class AentFormatError(ValueError):
    pass


def encode_aent(array) -> bytes:
    arr = np.asarray(array, dtype=np.float64)
    header = _HEADER.pack(MAGIC, VERSION, arr.ndim)
    extents = struct.pack(f"<{arr.ndim}Q", *arr.shape)
    return header + extents + arr.astype("<f4").tobytes(order="C")


def decode_aent(blob: bytes) -> np.ndarray:
    if len(blob) < _HEADER.size:
        raise AentFormatError("truncated header")
    magic, version, ndim = _HEADER.unpack_from(blob, 0)
    if magic != MAGIC:
        raise AentFormatError(f"bad magic {magic!r}")
    if version != VERSION:
        raise AentFormatError(f"unsupported version {version}")
    offset = _HEADER.size + 8 * ndim
    if len(blob) < offset:
        raise AentFormatError("truncated extents")
    shape = struct.unpack_from(f"<{ndim}Q", blob, _HEADER.size)
    count = int(np.prod(shape, dtype=np.int64))
    if len(blob) - offset != 4 * count:
        raise AentFormatError(f"payload is {len(blob) - offset} bytes, expected {4 * count} for shape {shape}")
    payload = np.frombuffer(blob, dtype="<f4", count=count, offset=offset)
    return payload.astype(np.float64).reshape(shape)


def write_aent(path, array) -> None:
    Path(path).write_bytes(encode_aent(array))


def read_aent(path) -> np.ndarray:
    return decode_aent(Path(path).read_bytes())
