"""
Binary parameter checkpoint format.

Layout (little-endian)::

    b"DRSM"  u32 version  32-byte sha256(header JSON)
    u32 header length  header JSON (UTF-8, canonical)
    u32 parameter count
    per parameter: u32 name length, name, u32 ndim, ndim x u32 dims, f32 payload
"""
import hashlib
import io
import json
import logging
import struct
from pathlib import Path
from typing import Any, Dict, Tuple, Union

import numpy as np

from deepradar.config import canonical_json
from deepradar.errors import CheckpointFormatError, DataIOError

logger = logging.getLogger(__name__)

MAGIC = b"DRSM"
VERSION = 1


def encode_checkpoint(header: Dict[str, Any], params: Dict[str, np.ndarray]) -> bytes:
    header_bytes = canonical_json(header).encode("utf-8")
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<I", VERSION))
    buf.write(hashlib.sha256(header_bytes).digest())
    buf.write(struct.pack("<I", len(header_bytes)))
    buf.write(header_bytes)
    buf.write(struct.pack("<I", len(params)))
    for name, array in params.items():
        name_bytes = name.encode("utf-8")
        array = np.asarray(array, dtype="<f4")
        buf.write(struct.pack("<I", len(name_bytes)))
        buf.write(name_bytes)
        buf.write(struct.pack("<I", array.ndim))
        buf.write(struct.pack(f"<{array.ndim}I", *array.shape))
        buf.write(array.tobytes(order="C"))
    return buf.getvalue()


class _Reader:
    def __init__(self, blob: bytes):
        self.blob = blob
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.blob):
            raise CheckpointFormatError(f"checkpoint truncated at byte {self.pos} (needed {n} more)")
        chunk = self.blob[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]


def decode_checkpoint(blob: bytes) -> Tuple[Dict[str, Any], Dict[str, np.ndarray]]:
    reader = _Reader(blob)
    if reader.take(4) != MAGIC:
        raise CheckpointFormatError("not a checkpoint file (bad magic)")
    version = reader.u32()
    if version != VERSION:
        raise CheckpointFormatError(f"unsupported checkpoint version {version} (expected {VERSION})")
    digest = reader.take(32)
    header_bytes = reader.take(reader.u32())
    if hashlib.sha256(header_bytes).digest() != digest:
        raise CheckpointFormatError("config hash does not match the stored architecture header")
    try:
        header = json.loads(header_bytes.decode("utf-8"))
    except (UnicodeDecodeError, ValueError) as e:
        raise CheckpointFormatError(f"undecodable checkpoint header: {e}") from e

    params: Dict[str, np.ndarray] = {}
    for _ in range(reader.u32()):
        name = reader.take(reader.u32()).decode("utf-8")
        ndim = reader.u32()
        dims = struct.unpack(f"<{ndim}I", reader.take(4 * ndim))
        count = int(np.prod(dims)) if ndim else 1
        payload = reader.take(4 * count)
        params[name] = np.frombuffer(payload, dtype="<f4").reshape(dims).astype(np.float32)
    if reader.pos != len(blob):
        raise CheckpointFormatError(f"{len(blob) - reader.pos} trailing bytes after the last parameter")
    return header, params


def write_checkpoint(path: Union[str, Path], header: Dict[str, Any], params: Dict[str, np.ndarray]) -> None:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(encode_checkpoint(header, params))
    except OSError as e:
        raise DataIOError(f"cannot write checkpoint {path}: {e}") from e
    logger.info(f"Wrote checkpoint {path} ({len(params)} tensors)")


def read_checkpoint(path: Union[str, Path]) -> Tuple[Dict[str, Any], Dict[str, np.ndarray]]:
    path = Path(path)
    try:
        blob = path.read_bytes()
    except OSError as e:
        raise DataIOError(f"cannot read checkpoint {path}: {e}") from e
    return decode_checkpoint(blob)


def header_hash(header: Dict[str, Any]) -> str:
    return hashlib.sha256(canonical_json(header).encode("utf-8")).hexdigest()
